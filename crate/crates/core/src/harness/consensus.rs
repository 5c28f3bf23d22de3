//! Average consensus without gradients: plain gossip, gossip with update
//! tracking, and their quasi-global momentum counterparts.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::trace::{consensus_error, MetricRecord, MetricTrace, TraceMeta};
use crate::error::{Error, Result};
use crate::topology::MixingMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConsensusMethod {
    /// `X ← W X`.
    Gossip,
    /// Update tracking on the gossip step.
    Gut,
    /// Quasi-global momentum gossip.
    QgGossip,
    /// Quasi-global momentum with update tracking.
    QgGutm,
}

impl ConsensusMethod {
    pub const ALL: [ConsensusMethod; 4] = [
        ConsensusMethod::Gossip,
        ConsensusMethod::Gut,
        ConsensusMethod::QgGossip,
        ConsensusMethod::QgGutm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConsensusMethod::Gossip => "gossip",
            ConsensusMethod::Gut => "gut",
            ConsensusMethod::QgGossip => "qg-gossip",
            ConsensusMethod::QgGutm => "qg-gutm",
        }
    }
}

impl fmt::Display for ConsensusMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConsensusMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ConsensusMethod::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown consensus method '{s}' (expected gossip, gut, qg-gossip or qg-gutm)"
                ))
            })
    }
}

/// Runs `rounds` consensus steps from `x0` (agents on rows) and records the
/// consensus error after every round, starting with round 0.
///
/// * `gut`: `Y^t = (W−I)X^t + μ[W Y^{t−1} − (W−I)(X^{t−1} − X^t)]`, `X^{t+1} = X^t + Y^t`.
/// * `qg-gutm`: `M^t = β M^{t−1} + (1−β)(X^t − X^{t−1})`,
///   `M̂^t = β M^t + (1−β)[(W−I)X^t + μ(W M̂^{t−1} − (W−I)(X^{t−1} − X^t))]`,
///   `X^{t+1} = X^t + M̂^t`.
///
/// History starts at `X^{−1} = X^0` with zero buffers. `gossip` and
/// `qg-gossip` are the same recursions with `μ = 0`.
pub fn run_consensus(
    w: &MixingMatrix,
    x0: &DMatrix<f64>,
    method: ConsensusMethod,
    mu: f64,
    beta: f64,
    rounds: usize,
) -> Result<MetricTrace> {
    Ok(run_consensus_states(w, x0, method, mu, beta, rounds)?.0)
}

/// As [`run_consensus`], also returning every iterate `X^0..=X^T`.
pub fn run_consensus_states(
    w: &MixingMatrix,
    x0: &DMatrix<f64>,
    method: ConsensusMethod,
    mu: f64,
    beta: f64,
    rounds: usize,
) -> Result<(MetricTrace, Vec<DMatrix<f64>>)> {
    if rounds == 0 {
        return Err(Error::Config("consensus needs at least one round".into()));
    }
    if x0.nrows() != w.n() {
        return Err(Error::Dimension(format!(
            "X0 has {} rows for {} agents",
            x0.nrows(),
            w.n()
        )));
    }
    let mu = match method {
        ConsensusMethod::Gossip | ConsensusMethod::QgGossip => 0.0,
        _ => mu,
    };
    let momentum = matches!(method, ConsensusMethod::QgGossip | ConsensusMethod::QgGutm);
    let (n, d) = x0.shape();
    let per_round = (w.max_degree() * d) as u64;

    let mut trace = MetricTrace::new(TraceMeta {
        method: method.name().to_string(),
        topology: w.kind().to_string(),
        n,
        seed: None,
    });
    let record = |round: usize, error: f64| MetricRecord {
        round,
        consensus_error: error,
        mean_loss: None,
        avg_model_loss: None,
        avg_model_accuracy: None,
        eta: None,
        comm_scalars: per_round * round as u64,
    };

    let mut x = x0.clone();
    let mut x_prev = x0.clone();
    let mut tracked_prev = DMatrix::zeros(n, d);
    let mut buffer_prev = DMatrix::zeros(n, d);
    let mut iterates = vec![x.clone()];
    trace.records.push(record(0, consensus_error(&x)));

    for t in 0..rounds {
        let gossip = w.mix_rows(&x) - &x;
        let back = &x_prev - &x;
        let back_gossip = w.mix_rows(&back) - &back;
        let tracked = gossip + (w.mix_rows(&tracked_prev) - back_gossip) * mu;
        let update = if momentum {
            let buffer = &buffer_prev * beta + (&x - &x_prev) * (1.0 - beta);
            let update = &buffer * beta + &tracked * (1.0 - beta);
            buffer_prev = buffer;
            update
        } else {
            tracked
        };
        let next = &x + &update;
        let error = consensus_error(&next);
        if !error.is_finite() || next.iter().any(|v| !v.is_finite()) {
            trace.divergence = Some(format!(
                "{method} with mu={mu} beta={beta} produced a non-finite value at round {}",
                t + 1
            ));
            break;
        }
        x_prev = std::mem::replace(&mut x, next);
        tracked_prev = update;
        trace.records.push(record(t + 1, error));
        iterates.push(x.clone());
    }
    Ok((trace, iterates))
}
