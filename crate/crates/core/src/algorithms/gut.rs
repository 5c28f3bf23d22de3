//! Global update tracking: the per-agent algorithm with explicit neighbor
//! copies, its memory-efficient variant, the quasi-global momentum variants,
//! and the two naive tracking rules used as ablations.

use rayon::prelude::*;

use crate::error::Result;
use crate::models::GradientOracle;
use crate::topology::MixingMatrix;

use super::vecops::{blend, ensure_finite, mix_field, mix_table, mixed_from_copies, step_by, sub};
use super::{expect_kind, AgentState, AlgorithmKind, AlgorithmSpec, RoundOutput};

/// Per-agent results of the compute phase, before the exchange.
struct Local {
    sent: Vec<f64>,
    delta: Vec<f64>,
    m: Vec<f64>,
    g: Vec<f64>,
    loss: f64,
}

/// How agents refresh their view of the neighborhood after the exchange.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Aggregate {
    /// Update each stored neighbor copy, then recompute `s` from them.
    Copies,
    /// Only `s` is stored: `s ← s − η Σ_j w_ij v_j`.
    Sum,
}

/// Barrier plus parameter update: every agent moves by `−η·sent_i` and
/// applies the received vectors to its neighborhood view.
fn exchange(
    states: &[AgentState],
    w: &MixingMatrix,
    eta: f64,
    locals: Vec<Local>,
    aggregate: Aggregate,
) -> RoundOutput {
    let sent: Vec<Vec<f64>> = locals.iter().map(|l| l.sent.clone()).collect();
    let losses = locals.iter().map(|l| l.loss).collect();
    let new_states = locals
        .into_par_iter()
        .enumerate()
        .map(|(i, local)| {
            let old = &states[i];
            let x = step_by(&old.x, eta, &local.sent);
            let copies: Vec<Vec<f64>> = w
                .neighbors(i)
                .iter()
                .filter(|&&(j, _)| j != i)
                .zip(&old.copies)
                .map(|(&(j, _), c)| step_by(c, eta, &sent[j]))
                .collect();
            let mut next = AgentState {
                x,
                s: Vec::new(),
                copies,
                y_prev: local.sent,
                delta_prev: local.delta,
                g_prev: local.g,
                x_prev: old.x.clone(),
                m: local.m,
                bias: old.bias.clone(),
                round: old.round + 1,
            };
            next.s = match aggregate {
                Aggregate::Copies => mixed_from_copies(w, i, &next),
                Aggregate::Sum => step_by(&old.s, eta, &mix_table(w, i, &sent)),
            };
            next
        })
        .collect();
    RoundOutput {
        states: new_states,
        losses,
    }
}

/// `δ_i = g_i − (s_i − x_i)/η`, returned with `s_i − x_i`.
fn local_delta(g: &[f64], mixed: &[f64], x: &[f64], eta: f64) -> (Vec<f64>, Vec<f64>) {
    let gossip = sub(mixed, x);
    let inv = 1.0 / eta;
    let delta = g
        .iter()
        .zip(&gossip)
        .map(|(gi, ui)| gi - inv * ui)
        .collect();
    (delta, gossip)
}

/// `δ + μ·[Σ_j w_ij v_j − c·(s_i − x_i) − δ_prev]`.
fn tracking(
    delta: &[f64],
    mu: f64,
    mixed_sent: &[f64],
    c: f64,
    gossip: &[f64],
    delta_prev: &[f64],
) -> Vec<f64> {
    (0..delta.len())
        .map(|k| delta[k] + mu * (mixed_sent[k] - c * gossip[k] - delta_prev[k]))
        .collect()
}

/// GUT with explicit neighbor copies.
///
/// For agent `i` at round `t`: evaluate `g_i` at the mixed point
/// `s_i = Σ_j w_ij x̂_j`, form `δ_i = g_i − (s_i − x_i)/η`, track
/// `y_i = δ_i + μ[Σ_j w_ij y_j^{prev} − (s_i − x_i)/η − δ_i^{prev}]`,
/// exchange `y`, then `x_i ← x_i − η y_i` and `x̂_j ← x̂_j − η y_j`.
///
/// `GUTm`/`GUTmN` replace `g_i` with a local heavy-ball (or Nesterov)
/// direction built from the buffer `m`.
pub fn gut_round(
    states: &[AgentState],
    w: &MixingMatrix,
    spec: &AlgorithmSpec,
    oracle: &dyn GradientOracle,
) -> Result<RoundOutput> {
    use AlgorithmKind::*;
    expect_kind(spec, &[Gut, Gutm, GutmN], "gut_round")?;
    tracked_round(states, w, spec, oracle, Aggregate::Copies)
}

/// Memory-efficient GUT: identical update, but each agent stores only the
/// aggregate `s_i` instead of one copy per neighbor.
pub fn memeff_round(
    states: &[AgentState],
    w: &MixingMatrix,
    spec: &AlgorithmSpec,
    oracle: &dyn GradientOracle,
) -> Result<RoundOutput> {
    tracked_round(states, w, spec, oracle, Aggregate::Sum)
}

fn tracked_round(
    states: &[AgentState],
    w: &MixingMatrix,
    spec: &AlgorithmSpec,
    oracle: &dyn GradientOracle,
    aggregate: Aggregate,
) -> Result<RoundOutput> {
    let round = states.first().map_or(0, |s| s.round);
    let eta = spec.eta.eta(round);
    let local_momentum = matches!(spec.kind, AlgorithmKind::Gutm | AlgorithmKind::GutmN);
    let nesterov = spec.uses_nesterov();
    let locals = (0..states.len())
        .into_par_iter()
        .map(|i| {
            let st = &states[i];
            let mixed = match aggregate {
                Aggregate::Copies => mixed_from_copies(w, i, st),
                Aggregate::Sum => st.s.clone(),
            };
            let (loss, g) = oracle.gradient(i, round, &mixed)?;
            let (direction, m) = if local_momentum {
                let m = blend(spec.beta, &st.m, 1.0, &g);
                let dir = if nesterov {
                    blend(1.0, &g, spec.beta, &m)
                } else {
                    m.clone()
                };
                (dir, m)
            } else {
                (g.clone(), st.m.clone())
            };
            let (delta, gossip) = local_delta(&direction, &mixed, &st.x, eta);
            let wy = mix_field(w, i, states, |s| &s.y_prev);
            let y = tracking(&delta, spec.mu, &wy, 1.0 / eta, &gossip, &st.delta_prev);
            ensure_finite(&y, "tracking variable", i, round)?;
            Ok(Local {
                sent: y,
                delta,
                m,
                g,
                loss,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(exchange(states, w, eta, locals, aggregate))
}

/// GUT with quasi-global momentum.
///
/// `QG-GUTm`: `y_i = δ_i + μ[Σ_j w_ij m_j^{prev} − (s_i − x_i)/η − δ_i^{prev}]`,
/// `m_i = β m_i^{prev} + (1−β) y_i`, exchange `m`, `x_i ← x_i − η m_i`.
///
/// `QG-GUTm-impl`: the correction uses `(1+β)/η` and `m_i = β m_i^{prev} + y_i`.
///
/// With Nesterov the transmitted (and applied) vector is the look-ahead
/// `β m_i + (1−β) y_i` (or `β m_i + y_i`) and the buffer `m_i` is kept local.
pub fn qg_gutm_round(
    states: &[AgentState],
    w: &MixingMatrix,
    spec: &AlgorithmSpec,
    oracle: &dyn GradientOracle,
) -> Result<RoundOutput> {
    use AlgorithmKind::*;
    expect_kind(spec, &[QgGutm, QgGutmN, QgGutmImpl], "qg_gutm_round")?;
    let round = states.first().map_or(0, |s| s.round);
    let eta = spec.eta.eta(round);
    let beta = spec.beta;
    let implementation = spec.kind == QgGutmImpl;
    let (correction, y_weight) = if implementation {
        ((1.0 + beta) / eta, 1.0)
    } else {
        (1.0 / eta, 1.0 - beta)
    };
    let nesterov = spec.uses_nesterov();
    let locals = (0..states.len())
        .into_par_iter()
        .map(|i| {
            let st = &states[i];
            let mixed = mixed_from_copies(w, i, st);
            let (loss, g) = oracle.gradient(i, round, &mixed)?;
            let (delta, gossip) = local_delta(&g, &mixed, &st.x, eta);
            let wm = mix_field(w, i, states, |s| &s.y_prev);
            let y = tracking(&delta, spec.mu, &wm, correction, &gossip, &st.delta_prev);
            let m = blend(beta, &st.m, y_weight, &y);
            let sent = if nesterov {
                blend(beta, &m, y_weight, &y)
            } else {
                m.clone()
            };
            ensure_finite(&sent, "momentum buffer", i, round)?;
            Ok(Local {
                sent,
                delta,
                m,
                g,
                loss,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(exchange(states, w, eta, locals, Aggregate::Copies))
}

/// Naive tracking rules. Both start from `Δ = G − (W−I)X/η` with gradients
/// at the mixed point.
///
/// Rule-a adds `μ[W Y^{prev} − Δ^{prev}]`: it tracks updates without moving
/// the neighbors' reference to the receiving agent.
/// Rule-b adds `−(μ/η)(W−I)(X − X^{prev})`.
pub fn rule_round(
    states: &[AgentState],
    w: &MixingMatrix,
    spec: &AlgorithmSpec,
    oracle: &dyn GradientOracle,
) -> Result<RoundOutput> {
    use AlgorithmKind::*;
    expect_kind(spec, &[RuleA, RuleB], "rule_round")?;
    let round = states.first().map_or(0, |s| s.round);
    let eta = spec.eta.eta(round);
    let inv = 1.0 / eta;
    let locals = (0..states.len())
        .into_par_iter()
        .map(|i| {
            let st = &states[i];
            let mixed = mixed_from_copies(w, i, st);
            let (loss, g) = oracle.gradient(i, round, &mixed)?;
            let (delta, _) = local_delta(&g, &mixed, &st.x, eta);
            let correction: Vec<f64> = match spec.kind {
                RuleA => sub(&mix_field(w, i, states, |s| &s.y_prev), &st.delta_prev),
                _ => {
                    let moved = sub(&st.x, &st.x_prev);
                    let mut mixed_moved = vec![0.0; st.dim()];
                    for &(j, wij) in w.neighbors(i) {
                        for (k, o) in mixed_moved.iter_mut().enumerate() {
                            *o += wij * (states[j].x[k] - states[j].x_prev[k]);
                        }
                    }
                    mixed_moved
                        .iter()
                        .zip(&moved)
                        .map(|(a, b)| -inv * (a - b))
                        .collect()
                }
            };
            let y: Vec<f64> = delta
                .iter()
                .zip(&correction)
                .map(|(d, c)| d + spec.mu * c)
                .collect();
            ensure_finite(&y, "tracking variable", i, round)?;
            Ok(Local {
                sent: y,
                delta,
                m: st.m.clone(),
                g,
                loss,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(exchange(states, w, eta, locals, Aggregate::Copies))
}
