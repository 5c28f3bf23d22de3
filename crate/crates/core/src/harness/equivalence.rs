use serde::Serialize;

use crate::algorithms::{init_states, step, AgentState, AlgorithmKind, AlgorithmSpec};
use crate::error::{Error, Result};
use crate::models::{GradientOracle, Problem, ProblemOracle};
use crate::topology::MixingMatrix;

/// The three alternative formulations compared against the per-agent rule.
pub const EQUIVALENT_FORMS: [AlgorithmKind; 3] = [
    AlgorithmKind::GutMatrix,
    AlgorithmKind::GutBias,
    AlgorithmKind::GutMemeff,
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FormDeviation {
    pub form: AlgorithmKind,
    pub max_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub rounds: usize,
    pub tol: f64,
    pub forms: Vec<FormDeviation>,
    /// Largest deviation over all forms after each round.
    pub per_round: Vec<f64>,
    pub max_deviation: f64,
    pub pass: bool,
}

/// Largest `|a − b| / (1 + |b|)` over all agents and coordinates.
pub fn relative_deviation(a: &[AgentState], reference: &[AgentState]) -> f64 {
    a.iter()
        .zip(reference)
        .flat_map(|(s, r)| s.x.iter().zip(&r.x))
        .map(|(v, rv)| {
            let dev = (v - rv).abs() / (1.0 + rv.abs());
            if dev.is_nan() {
                f64::INFINITY
            } else {
                dev
            }
        })
        .fold(0.0, f64::max)
}

/// Runs GUT and its matrix, bias and memory-efficient forms side by side on
/// identical gradient streams and reports how far the iterates drift apart.
///
/// Passes when the largest deviation is at most `tol`. Equality is only ever
/// claimed up to a positive tolerance, so `tol ≤ 0` always fails.
pub fn check_equivalence(
    w: &MixingMatrix,
    x0: &[Vec<f64>],
    spec: &AlgorithmSpec,
    oracle: &dyn GradientOracle,
    rounds: usize,
    tol: f64,
) -> Result<EquivalenceReport> {
    if rounds == 0 {
        return Err(Error::Config("equivalence needs at least one round".into()));
    }
    let base = AlgorithmSpec {
        kind: AlgorithmKind::Gut,
        ..spec.clone()
    };
    let specs: Vec<AlgorithmSpec> = EQUIVALENT_FORMS
        .iter()
        .map(|&kind| AlgorithmSpec {
            kind,
            ..spec.clone()
        })
        .collect();
    let mut reference = init_states(x0, w, &base)?;
    let mut others = specs
        .iter()
        .map(|s| init_states(x0, w, s))
        .collect::<Result<Vec<_>>>()?;
    let mut form_max = [0.0f64; 3];
    let mut per_round = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        reference = step(&reference, w, &base, oracle)?.states;
        let mut worst = 0.0f64;
        for (k, (states, s)) in others.iter_mut().zip(&specs).enumerate() {
            *states = step(states, w, s, oracle)?.states;
            let dev = relative_deviation(states, &reference);
            form_max[k] = form_max[k].max(dev);
            worst = worst.max(dev);
        }
        per_round.push(worst);
    }
    let max_deviation = form_max.iter().copied().fold(0.0, f64::max);
    Ok(EquivalenceReport {
        rounds,
        tol,
        forms: EQUIVALENT_FORMS
            .iter()
            .zip(form_max)
            .map(|(&form, max_deviation)| FormDeviation {
                form,
                max_deviation,
            })
            .collect(),
        per_round,
        max_deviation,
        pass: tol > 0.0 && max_deviation <= tol,
    })
}

/// [`check_equivalence`] on a problem, starting every agent from the
/// problem's initial parameters and drawing minibatches with `seed`.
pub fn check_problem_equivalence(
    w: &MixingMatrix,
    problem: &Problem,
    spec: &AlgorithmSpec,
    batch_size: usize,
    seed: u64,
    rounds: usize,
    tol: f64,
) -> Result<EquivalenceReport> {
    let x0 = vec![problem.init_params(seed); w.n()];
    let oracle = ProblemOracle {
        problem,
        batch_size,
        seed,
    };
    check_equivalence(w, &x0, spec, &oracle, rounds, tol)
}
