use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

/// Per-agent objectives `f_i(x) = (L/2)·‖x − b_i‖²`.
///
/// Targets are `b_i = b̄ + (ζ/L)·u_i` with `Σ u_i = 0` and
/// `(1/n) Σ ‖u_i‖² = 1`, so the gradient deviation
/// `(1/n) Σ ‖∇f_i(x) − ∇f(x)‖²` is exactly `ζ²` at every `x`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    pub targets: Vec<Vec<f64>>,
    pub center: Vec<f64>,
    pub smoothness: f64,
    pub sigma: f64,
    pub zeta: f64,
}

impl Quadratic {
    pub fn new(
        d: usize,
        n_agents: usize,
        zeta: f64,
        sigma: f64,
        smoothness: f64,
        seed: u64,
    ) -> Result<Self> {
        if n_agents == 0 {
            return Err(Error::Problem("quadratic needs at least one agent".into()));
        }
        if n_agents < 2 && zeta > 0.0 {
            return Err(Error::Problem(
                "heterogeneity zeta > 0 needs at least two agents".into(),
            ));
        }
        if !(zeta >= 0.0 && sigma >= 0.0 && smoothness > 0.0) {
            return Err(Error::Problem(format!(
                "need zeta >= 0, sigma >= 0, L > 0 (got {zeta}, {sigma}, {smoothness})"
            )));
        }
        if d == 0 {
            return Err(Error::Problem("dimension must be positive".into()));
        }
        let mut rng = rng::global(seed, Purpose::Problem);
        let center: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut dirs: Vec<Vec<f64>> = (0..n_agents)
            .map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        if n_agents >= 2 {
            for k in 0..d {
                let mean = dirs.iter().map(|u| u[k]).sum::<f64>() / n_agents as f64;
                for u in &mut dirs {
                    u[k] -= mean;
                }
            }
            let msq = dirs
                .iter()
                .map(|u| u.iter().map(|v| v * v).sum::<f64>())
                .sum::<f64>()
                / n_agents as f64;
            let scale = zeta / smoothness / msq.sqrt();
            for u in &mut dirs {
                for v in u.iter_mut() {
                    *v *= scale;
                }
            }
        }
        let targets = dirs
            .into_iter()
            .map(|u| {
                if n_agents < 2 {
                    center.clone()
                } else {
                    center.iter().zip(u).map(|(c, v)| c + v).collect()
                }
            })
            .collect();
        Ok(Self {
            targets,
            center,
            smoothness,
            sigma,
            zeta,
        })
    }

    /// Builds the problem from explicit targets.
    pub fn from_targets(targets: Vec<Vec<f64>>, sigma: f64) -> Result<Self> {
        let n = targets.len();
        let d = targets.first().map_or(0, Vec::len);
        if n == 0 || d == 0 || targets.iter().any(|t| t.len() != d) {
            return Err(Error::Problem(
                "targets must be a nonempty n x d table".into(),
            ));
        }
        let center: Vec<f64> = (0..d)
            .map(|k| targets.iter().map(|t| t[k]).sum::<f64>() / n as f64)
            .collect();
        let zeta = (targets
            .iter()
            .map(|t| {
                t.iter()
                    .zip(&center)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
            })
            .sum::<f64>()
            / n as f64)
            .sqrt();
        Ok(Self {
            targets,
            center,
            smoothness: 1.0,
            sigma,
            zeta,
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn n_agents(&self) -> usize {
        self.targets.len()
    }

    pub fn local(&self, agent: usize, x: &[f64]) -> (f64, Vec<f64>) {
        let grad: Vec<f64> = x
            .iter()
            .zip(&self.targets[agent])
            .map(|(xi, bi)| self.smoothness * (xi - bi))
            .collect();
        let sq: f64 = x
            .iter()
            .zip(&self.targets[agent])
            .map(|(xi, bi)| (xi - bi).powi(2))
            .sum();
        (0.5 * self.smoothness * sq, grad)
    }

    /// Minimizer of the average objective.
    pub fn optimum(&self) -> Vec<f64> {
        self.center.clone()
    }

    /// `f* = (1/n) Σ (L/2)‖b̄ − b_i‖²`.
    pub fn optimal_value(&self) -> f64 {
        let n = self.n_agents() as f64;
        self.targets
            .iter()
            .map(|t| {
                0.5 * self.smoothness
                    * t.iter()
                        .zip(&self.center)
                        .map(|(a, b)| (a - b).powi(2))
                        .sum::<f64>()
            })
            .sum::<f64>()
            / n
    }

    /// Exact local gradient plus `σ·N(0, I)` noise from the given substream.
    pub fn stochastic(&self, agent: usize, x: &[f64], seed: u64, round: usize) -> (f64, Vec<f64>) {
        let (loss, mut grad) = self.local(agent, x);
        if self.sigma > 0.0 {
            let mut rng = rng::substream(seed, Purpose::Noise, agent, round);
            for g in &mut grad {
                let z: f64 = StandardNormal.sample(&mut rng);
                *g += self.sigma * z;
            }
        }
        (loss, grad)
    }
}
