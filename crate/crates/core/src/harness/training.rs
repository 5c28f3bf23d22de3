use rayon::prelude::*;
use serde::Serialize;

use super::trace::{consensus_error_rows, MetricRecord, MetricTrace, TraceMeta};
use crate::algorithms::{comm_cost, init_states, step, AlgorithmSpec, StepSchedule};
use crate::error::{Error, Result};
use crate::models::{make_problem, Problem, ProblemOracle, SyntheticProblemSpec};
use crate::topology::MixingMatrix;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainOptions {
    pub rounds: usize,
    pub batch_size: usize,
    /// One independent run per seed. The seed drives initialization,
    /// minibatch sampling and injected noise; data and partition come from
    /// the problem spec.
    pub seeds: Vec<u64>,
    pub eval_every: usize,
    /// Divide the step size by 10 at 50% and again at 75% of the rounds.
    pub decay: bool,
    /// Worker threads for the run; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            rounds: 200,
            batch_size: 32,
            seeds: vec![1],
            eval_every: 10,
            decay: true,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and population standard deviation; `None` when `values` is empty.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Self {
            mean,
            std: var.sqrt(),
        })
    }
}

/// Final-round metrics across seeds. Divergent runs are left out.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingSummary {
    pub consensus_error: Option<MeanStd>,
    pub avg_model_loss: Option<MeanStd>,
    pub avg_model_accuracy: Option<MeanStd>,
    pub divergent_seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingReport {
    pub traces: Vec<MetricTrace>,
    pub summary: TrainingSummary,
}

impl TrainingReport {
    pub fn any_divergent(&self) -> bool {
        !self.summary.divergent_seeds.is_empty()
    }
}

/// Element-wise mean of the agents' parameters.
pub fn average_model(xs: &[Vec<f64>]) -> Vec<f64> {
    let n = xs.len().max(1) as f64;
    let d = xs.first().map_or(0, Vec::len);
    let mut avg = vec![0.0; d];
    for x in xs {
        for (a, v) in avg.iter_mut().zip(x) {
            *a += v;
        }
    }
    avg.iter_mut().for_each(|a| *a /= n);
    avg
}

/// Trains on the problem described by `problem` once per seed and records
/// metrics at round 0, every `eval_every` rounds, and at the final round.
pub fn run_training(
    w: &MixingMatrix,
    problem: &SyntheticProblemSpec,
    spec: &AlgorithmSpec,
    opts: &TrainOptions,
) -> Result<TrainingReport> {
    if opts.seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    if opts.rounds == 0 || opts.batch_size == 0 || opts.eval_every == 0 {
        return Err(Error::Config(
            "rounds, batch size and eval_every must be positive".into(),
        ));
    }
    if problem.n_agents != w.n() {
        return Err(Error::Dimension(format!(
            "problem has {} agents, mixing matrix has {}",
            problem.n_agents,
            w.n()
        )));
    }
    let spec = if opts.decay {
        spec.clone()
            .with_schedule(StepSchedule::decay_at_half_and_three_quarters(
                spec.eta.base(),
                opts.rounds,
            ))
    } else {
        spec.clone()
    };
    spec.validate()?;
    let instance = make_problem(problem)?;

    let run_all = || {
        opts.seeds
            .par_iter()
            .map(|&seed| run_seed(w, &instance, &spec, opts, seed))
            .collect::<Result<Vec<_>>>()
    };
    let traces = match opts.threads {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?
            .install(run_all)?,
        None => run_all()?,
    };
    let summary = summarize(&traces);
    Ok(TrainingReport { traces, summary })
}

fn run_seed(
    w: &MixingMatrix,
    problem: &Problem,
    spec: &AlgorithmSpec,
    opts: &TrainOptions,
    seed: u64,
) -> Result<MetricTrace> {
    let n = w.n();
    let x0 = problem.init_params(seed);
    let per_round = comm_cost(spec, x0.len(), w);
    let mut states = init_states(&vec![x0; n], w, spec)?;
    let oracle = ProblemOracle {
        problem,
        batch_size: opts.batch_size,
        seed,
    };
    let mut trace = MetricTrace::new(TraceMeta {
        method: spec.kind.to_string(),
        topology: w.kind().to_string(),
        n,
        seed: Some(seed),
    });

    let eta_at = |round: usize| spec.eta.eta(round.min(opts.rounds - 1));
    trace
        .records
        .push(measure(problem, &states_x(&states), 0, eta_at(0), 0)?);
    for t in 0..opts.rounds {
        match step(&states, w, spec, &oracle) {
            Ok(out) => states = out.states,
            Err(Error::NonFinite { what, agent, round }) => {
                trace.divergence =
                    Some(format!("non-finite {what} at agent {agent}, round {round}"));
                break;
            }
            Err(e) => return Err(e),
        }
        let round = t + 1;
        if round % opts.eval_every == 0 || round == opts.rounds {
            let record = measure(
                problem,
                &states_x(&states),
                round,
                eta_at(round),
                per_round * round as u64,
            )?;
            let bad = !record.consensus_error.is_finite()
                || record.avg_model_loss.is_some_and(|l| !l.is_finite());
            trace.records.push(record);
            if bad {
                trace.divergence = Some(format!("non-finite metrics at round {round}"));
                break;
            }
        }
    }
    Ok(trace)
}

fn states_x(states: &[crate::algorithms::AgentState]) -> Vec<Vec<f64>> {
    states.iter().map(|s| s.x.clone()).collect()
}

fn measure(
    problem: &Problem,
    xs: &[Vec<f64>],
    round: usize,
    eta: f64,
    comm: u64,
) -> Result<MetricRecord> {
    let mean_loss = xs
        .par_iter()
        .enumerate()
        .map(|(i, x)| problem.local_loss(i, x))
        .collect::<Vec<_>>()
        .iter()
        .sum::<f64>()
        / xs.len() as f64;
    let avg = average_model(xs);
    let (loss, accuracy) = if avg.iter().all(|v| v.is_finite()) {
        let eval = problem.evaluate(&avg)?;
        (eval.loss, eval.accuracy)
    } else {
        (f64::NAN, None)
    };
    Ok(MetricRecord {
        round,
        consensus_error: consensus_error_rows(xs),
        mean_loss: Some(mean_loss),
        avg_model_loss: Some(loss),
        avg_model_accuracy: accuracy,
        eta: Some(eta),
        comm_scalars: comm,
    })
}

fn summarize(traces: &[MetricTrace]) -> TrainingSummary {
    let finished: Vec<&MetricRecord> = traces
        .iter()
        .filter(|t| !t.is_divergent())
        .filter_map(MetricTrace::last)
        .collect();
    let collect = |f: &dyn Fn(&MetricRecord) -> Option<f64>| {
        let values: Vec<f64> = finished.iter().filter_map(|r| f(r)).collect();
        MeanStd::of(&values)
    };
    TrainingSummary {
        consensus_error: collect(&|r| Some(r.consensus_error)),
        avg_model_loss: collect(&|r| r.avg_model_loss),
        avg_model_accuracy: collect(&|r| r.avg_model_accuracy),
        divergent_seeds: traces
            .iter()
            .filter(|t| t.is_divergent())
            .filter_map(|t| t.meta.seed)
            .collect(),
    }
}
