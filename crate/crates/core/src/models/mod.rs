//! Desk-scale objectives with controllable heterogeneity and noise.
//!
//! A [`Problem`] owns every agent's local objective. Stochastic gradients are
//! drawn through a [`Batch`], whose randomness is keyed by `(seed, agent,
//! round)`; the same batch always yields the same gradient.

mod classifier;
mod quadratic;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use classifier::{Architecture, Dataset, GaussianClusters, Model};
pub use quadratic::Quadratic;

use crate::error::{Error, Result};
use crate::partition::{dirichlet_partition, Partition};
use crate::rng::{self, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Quadratic,
    Softmax,
    Mlp,
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProblemKind::Quadratic => "quadratic",
            ProblemKind::Softmax => "softmax",
            ProblemKind::Mlp => "mlp",
        })
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadratic" => Ok(ProblemKind::Quadratic),
            "softmax" => Ok(ProblemKind::Softmax),
            "mlp" => Ok(ProblemKind::Mlp),
            other => Err(Error::Problem(format!(
                "unknown problem kind '{other}' (expected quadratic, softmax or mlp)"
            ))),
        }
    }
}

/// Everything needed to generate a problem instance.
///
/// `d` is the parameter dimension for quadratics and the feature dimension for
/// classifiers. `zeta`, `sigma` and `smoothness` only apply to quadratics;
/// classifiers get their heterogeneity from the Dirichlet `alpha` and their
/// noise from minibatching.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticProblemSpec {
    pub kind: ProblemKind,
    pub d: usize,
    pub n_agents: usize,
    pub zeta: f64,
    pub sigma: f64,
    pub smoothness: f64,
    pub seed: u64,
    pub classes: usize,
    pub samples: usize,
    pub test_samples: usize,
    pub hidden: usize,
    pub separation: f64,
    pub alpha: f64,
    pub partition_seed: u64,
    pub min_per_agent: usize,
}

impl Default for SyntheticProblemSpec {
    fn default() -> Self {
        Self {
            kind: ProblemKind::Quadratic,
            d: 10,
            n_agents: 16,
            zeta: 1.0,
            sigma: 0.1,
            smoothness: 1.0,
            seed: 0,
            classes: 10,
            samples: 4000,
            test_samples: 2000,
            hidden: 32,
            separation: 1.0,
            alpha: 0.01,
            partition_seed: 0,
            min_per_agent: 1,
        }
    }
}

/// Classification problem: shared data table split across agents.
#[derive(Debug, Clone)]
pub struct Classifier {
    pub model: Model,
    pub train: Dataset,
    pub test: Dataset,
    pub partition: Partition,
}

#[derive(Debug, Clone)]
pub enum Problem {
    Quadratic(Quadratic),
    Classifier(Classifier),
}

/// One agent's minibatch for one round.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub agent: usize,
    pub round: usize,
    /// Sample indices, all from the agent's partition entry. Empty for quadratics.
    pub indices: Vec<usize>,
    /// Seed for the noise substream; `None` disables injected noise.
    pub noise_seed: Option<u64>,
}

/// Loss and accuracy of a parameter vector on held-out data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    /// Absent for regression problems.
    pub accuracy: Option<f64>,
}

pub fn make_quadratic(spec: &SyntheticProblemSpec) -> Result<Problem> {
    if spec.kind != ProblemKind::Quadratic {
        return Err(Error::Problem(format!(
            "make_quadratic called with kind {}",
            spec.kind
        )));
    }
    Quadratic::new(
        spec.d,
        spec.n_agents,
        spec.zeta,
        spec.sigma,
        spec.smoothness,
        spec.seed,
    )
    .map(Problem::Quadratic)
}

/// Gaussian-cluster data, split by a Dirichlet partition.
pub fn make_classifier(spec: &SyntheticProblemSpec) -> Result<Problem> {
    let arch = match spec.kind {
        ProblemKind::Softmax => Architecture::Softmax,
        ProblemKind::Mlp => {
            if spec.hidden == 0 || spec.hidden > 64 {
                return Err(Error::Problem(format!(
                    "mlp hidden width must be in 1..=64, got {}",
                    spec.hidden
                )));
            }
            Architecture::Mlp {
                hidden: spec.hidden,
            }
        }
        ProblemKind::Quadratic => {
            return Err(Error::Problem(
                "make_classifier called with quadratic".into(),
            ))
        }
    };
    if spec.classes < 2 || spec.d == 0 {
        return Err(Error::Problem(
            "classifier needs at least 2 classes and 1 feature".into(),
        ));
    }
    if spec.test_samples == 0 {
        return Err(Error::Problem("test set must be nonempty".into()));
    }
    let clusters = GaussianClusters::new(spec.classes, spec.d, spec.separation, spec.seed);
    let train = clusters.sample(spec.samples, spec.seed, 0);
    let test = clusters.sample(spec.test_samples, spec.seed, 1);
    let partition = dirichlet_partition(
        &train.labels,
        spec.n_agents,
        spec.alpha,
        spec.partition_seed,
        spec.min_per_agent,
    )?;
    Ok(Problem::Classifier(Classifier {
        model: Model {
            arch,
            features: spec.d,
            classes: spec.classes,
        },
        train,
        test,
        partition,
    }))
}

pub fn make_problem(spec: &SyntheticProblemSpec) -> Result<Problem> {
    match spec.kind {
        ProblemKind::Quadratic => make_quadratic(spec),
        _ => make_classifier(spec),
    }
}

impl Problem {
    pub fn dim(&self) -> usize {
        match self {
            Problem::Quadratic(q) => q.dim(),
            Problem::Classifier(c) => c.model.dim(),
        }
    }

    pub fn n_agents(&self) -> usize {
        match self {
            Problem::Quadratic(q) => q.n_agents(),
            Problem::Classifier(c) => c.partition.n_agents(),
        }
    }

    /// Global minimizer and minimum, when known analytically.
    pub fn optimum(&self) -> Option<(Vec<f64>, f64)> {
        match self {
            Problem::Quadratic(q) => Some((q.optimum(), q.optimal_value())),
            Problem::Classifier(_) => None,
        }
    }

    /// Synchronized starting point shared by every agent.
    pub fn init_params(&self, seed: u64) -> Vec<f64> {
        match self {
            Problem::Quadratic(q) => vec![0.0; q.dim()],
            Problem::Classifier(c) => c.model.init(&mut rng::global(seed, Purpose::Init)),
        }
    }

    /// Minibatch for `agent` at `round`, sampled with replacement from its shard.
    pub fn make_batch(&self, agent: usize, round: usize, batch_size: usize, seed: u64) -> Batch {
        let indices = match self {
            Problem::Quadratic(_) => Vec::new(),
            Problem::Classifier(c) => {
                let shard = &c.partition.assignments[agent];
                if shard.is_empty() {
                    Vec::new()
                } else {
                    let mut r = rng::substream(seed, Purpose::Batch, agent, round);
                    (0..batch_size)
                        .map(|_| shard[r.random_range(0..shard.len())])
                        .collect()
                }
            }
        };
        Batch {
            agent,
            round,
            indices,
            noise_seed: Some(seed),
        }
    }

    /// Stochastic loss and gradient of agent `batch.agent`'s objective.
    pub fn loss_and_grad(&self, params: &[f64], batch: &Batch) -> Result<(f64, Vec<f64>)> {
        if params.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "params have length {}, problem dimension is {}",
                params.len(),
                self.dim()
            )));
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "parameters",
                agent: batch.agent,
                round: batch.round,
            });
        }
        Ok(match self {
            Problem::Quadratic(q) => match batch.noise_seed {
                Some(seed) => q.stochastic(batch.agent, params, seed, batch.round),
                None => q.local(batch.agent, params),
            },
            Problem::Classifier(c) => c.model.loss_grad(params, &c.train, &batch.indices),
        })
    }

    /// Noise-free objective of one agent over its whole shard.
    pub fn local_objective(&self, agent: usize, params: &[f64]) -> (f64, Vec<f64>) {
        match self {
            Problem::Quadratic(q) => q.local(agent, params),
            Problem::Classifier(c) => {
                c.model
                    .loss_grad(params, &c.train, &c.partition.assignments[agent])
            }
        }
    }

    pub fn local_loss(&self, agent: usize, params: &[f64]) -> f64 {
        match self {
            Problem::Quadratic(q) => q.local(agent, params).0,
            Problem::Classifier(c) => {
                c.model
                    .loss(params, &c.train, &c.partition.assignments[agent])
            }
        }
    }

    /// `f(x) = (1/n) Σ f_i(x)` and its gradient.
    pub fn global_objective(&self, params: &[f64]) -> (f64, Vec<f64>) {
        let n = self.n_agents();
        let mut grad = vec![0.0; self.dim()];
        let mut loss = 0.0;
        for i in 0..n {
            let (l, g) = self.local_objective(i, params);
            loss += l;
            for (a, b) in grad.iter_mut().zip(g) {
                *a += b;
            }
        }
        let inv = 1.0 / n as f64;
        grad.iter_mut().for_each(|g| *g *= inv);
        (loss * inv, grad)
    }

    pub fn global_loss(&self, params: &[f64]) -> f64 {
        let n = self.n_agents();
        (0..n).map(|i| self.local_loss(i, params)).sum::<f64>() / n as f64
    }

    /// Evaluates (typically averaged) parameters: test-set loss and accuracy
    /// for classifiers, the global objective for quadratics.
    pub fn evaluate(&self, params: &[f64]) -> Result<Evaluation> {
        match self {
            Problem::Quadratic(_) => Ok(Evaluation {
                loss: self.global_loss(params),
                accuracy: None,
            }),
            Problem::Classifier(c) => evaluate(&c.model, params, &c.test),
        }
    }
}

/// Full-set loss and accuracy of a classifier.
pub fn evaluate(model: &Model, params: &[f64], test: &Dataset) -> Result<Evaluation> {
    if test.is_empty() {
        return Err(Error::Problem(
            "cannot evaluate on an empty test set".into(),
        ));
    }
    let (loss, acc) = model.evaluate(params, test);
    Ok(Evaluation {
        loss,
        accuracy: Some(acc),
    })
}

/// Largest per-coordinate relative error between the analytic gradient of the
/// noise-free global objective and central differences with step `eps`.
///
/// Relative error is `|a − n| / max(1, |a|, |n|)`, so coordinates with tiny
/// gradients are compared absolutely.
pub fn finite_diff_check(problem: &Problem, params: &[f64], eps: f64) -> Result<f64> {
    if !(1e-8..=1e-3).contains(&eps) {
        return Err(Error::Problem(format!(
            "eps must be in [1e-8, 1e-3], got {eps}"
        )));
    }
    let (_, analytic) = problem.global_objective(params);
    let mut probe = params.to_vec();
    let mut worst: f64 = 0.0;
    for j in 0..params.len() {
        probe[j] = params[j] + eps;
        let up = problem.global_loss(&probe);
        probe[j] = params[j] - eps;
        let down = problem.global_loss(&probe);
        probe[j] = params[j];
        let numeric = (up - down) / (2.0 * eps);
        let scale = 1f64.max(analytic[j].abs()).max(numeric.abs());
        worst = worst.max((analytic[j] - numeric).abs() / scale);
    }
    Ok(worst)
}

/// Source of per-agent stochastic gradients for the round functions.
pub trait GradientOracle: Sync {
    /// Loss and gradient for `agent` at `round`, evaluated at `params`.
    fn gradient(&self, agent: usize, round: usize, params: &[f64]) -> Result<(f64, Vec<f64>)>;
}

/// Draws minibatches from a [`Problem`].
#[derive(Debug, Clone, Copy)]
pub struct ProblemOracle<'a> {
    pub problem: &'a Problem,
    pub batch_size: usize,
    pub seed: u64,
}

impl GradientOracle for ProblemOracle<'_> {
    fn gradient(&self, agent: usize, round: usize, params: &[f64]) -> Result<(f64, Vec<f64>)> {
        let batch = self
            .problem
            .make_batch(agent, round, self.batch_size, self.seed);
        self.problem.loss_and_grad(params, &batch)
    }
}

/// Always returns a zero gradient: pure gossip dynamics.
#[derive(Debug, Clone, Copy)]
pub struct ZeroOracle;

impl GradientOracle for ZeroOracle {
    fn gradient(&self, _agent: usize, _round: usize, params: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok((0.0, vec![0.0; params.len()]))
    }
}

/// Wraps a closure `(agent, round, params) -> gradient`.
pub struct FnOracle<F>(pub F);

impl<F> GradientOracle for FnOracle<F>
where
    F: Fn(usize, usize, &[f64]) -> Vec<f64> + Sync,
{
    fn gradient(&self, agent: usize, round: usize, params: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok((0.0, (self.0)(agent, round, params)))
    }
}
