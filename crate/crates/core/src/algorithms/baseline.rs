//! Gossip baselines (DSGD and its momentum variants) and gradient tracking.
//! These evaluate gradients at each agent's own parameters.

use rayon::prelude::*;

use crate::error::Result;
use crate::models::GradientOracle;
use crate::topology::MixingMatrix;

use super::vecops::{blend, ensure_finite, mix_field, mix_table, step_by};
use super::{expect_kind, AgentState, AlgorithmKind, AlgorithmSpec, RoundOutput};

/// Rebuilds neighbor copies and the aggregate from the new parameters.
fn refresh_views(w: &MixingMatrix, xs: &[Vec<f64>], i: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let copies = w
        .neighbors(i)
        .iter()
        .filter(|&&(j, _)| j != i)
        .map(|&(j, _)| xs[j].clone())
        .collect();
    (copies, mix_table(w, i, xs))
}

/// DSGD family: `x_i' = Σ_j w_ij (x_j − η d_j)`.
///
/// * `DSGD`: `d = g`.
/// * `DSGDm`: `m = β m + g`, `d = m` (Nesterov: `d = g + β m`).
/// * `QG-DSGDm`: `d = g + β m^{prev}` (Nesterov: `d = g + β(β m^{prev} + g)`),
///   then `m = β m^{prev} + (1−β)(x − x')/η` from the realized displacement.
pub fn baseline_round(
    states: &[AgentState],
    w: &MixingMatrix,
    spec: &AlgorithmSpec,
    oracle: &dyn GradientOracle,
) -> Result<RoundOutput> {
    use AlgorithmKind::*;
    expect_kind(
        spec,
        &[Dsgd, Dsgdm, DsgdmN, QgDsgdm, QgDsgdmN],
        "baseline_round",
    )?;
    let round = states.first().map_or(0, |s| s.round);
    let eta = spec.eta.eta(round);
    let beta = spec.beta;
    let nesterov = spec.uses_nesterov();
    let kind = spec.kind;

    let computed = (0..states.len())
        .into_par_iter()
        .map(|i| {
            let st = &states[i];
            let (loss, g) = oracle.gradient(i, round, &st.x)?;
            let (direction, m) = match kind {
                Dsgd => (g.clone(), st.m.clone()),
                Dsgdm | DsgdmN => {
                    let m = blend(beta, &st.m, 1.0, &g);
                    let d = if nesterov {
                        blend(1.0, &g, beta, &m)
                    } else {
                        m.clone()
                    };
                    (d, m)
                }
                _ => {
                    let d = if nesterov {
                        let look = blend(beta, &st.m, 1.0, &g);
                        blend(1.0, &g, beta, &look)
                    } else {
                        blend(1.0, &g, beta, &st.m)
                    };
                    (d, st.m.clone())
                }
            };
            let half = step_by(&st.x, eta, &direction);
            ensure_finite(&half, "parameters", i, round)?;
            Ok((half, m, g, loss))
        })
        .collect::<Result<Vec<_>>>()?;

    let halves: Vec<Vec<f64>> = computed.iter().map(|c| c.0.clone()).collect();
    let xs: Vec<Vec<f64>> = (0..states.len())
        .map(|i| mix_table(w, i, &halves))
        .collect();
    let losses = computed.iter().map(|c| c.3).collect();
    let new_states = computed
        .into_par_iter()
        .enumerate()
        .map(|(i, (half, m, g, _))| {
            let st = &states[i];
            let x = xs[i].clone();
            let m = match kind {
                QgDsgdm | QgDsgdmN => {
                    let inv = 1.0 / eta;
                    st.m.iter()
                        .zip(st.x.iter().zip(&x))
                        .map(|(mp, (old, new))| beta * mp + (1.0 - beta) * (old - new) * inv)
                        .collect()
                }
                _ => m,
            };
            let (copies, s) = refresh_views(w, &xs, i);
            AgentState {
                x,
                s,
                copies,
                y_prev: half,
                delta_prev: st.delta_prev.clone(),
                g_prev: g,
                x_prev: st.x.clone(),
                m,
                bias: st.bias.clone(),
                round: st.round + 1,
            }
        })
        .collect();
    Ok(RoundOutput {
        states: new_states,
        losses,
    })
}

/// Gradient tracking: `y_i = Σ_j w_ij y_j^{prev} − g_i^{prev} + g_i` and
/// `x_i' = Σ_j w_ij (x_j − η y_j)`. Both `x` and `y` cross the network.
///
/// With zero-initialized history the first round gives `y_i = g_i`.
pub fn gradient_tracking_round(
    states: &[AgentState],
    w: &MixingMatrix,
    spec: &AlgorithmSpec,
    oracle: &dyn GradientOracle,
) -> Result<RoundOutput> {
    expect_kind(spec, &[AlgorithmKind::Gt], "gradient_tracking_round")?;
    let round = states.first().map_or(0, |s| s.round);
    let eta = spec.eta.eta(round);

    let computed = (0..states.len())
        .into_par_iter()
        .map(|i| {
            let st = &states[i];
            let (loss, g) = oracle.gradient(i, round, &st.x)?;
            let wy = mix_field(w, i, states, |s| &s.y_prev);
            let y: Vec<f64> = (0..g.len()).map(|k| wy[k] - st.g_prev[k] + g[k]).collect();
            ensure_finite(&y, "tracking variable", i, round)?;
            let half = step_by(&st.x, eta, &y);
            Ok((half, y, g, loss))
        })
        .collect::<Result<Vec<_>>>()?;

    let halves: Vec<Vec<f64>> = computed.iter().map(|c| c.0.clone()).collect();
    let xs: Vec<Vec<f64>> = (0..states.len())
        .map(|i| mix_table(w, i, &halves))
        .collect();
    let losses = computed.iter().map(|c| c.3).collect();
    let new_states = computed
        .into_par_iter()
        .enumerate()
        .map(|(i, (_, y, g, _))| {
            let st = &states[i];
            let (copies, s) = refresh_views(w, &xs, i);
            AgentState {
                x: xs[i].clone(),
                s,
                copies,
                y_prev: y,
                delta_prev: st.delta_prev.clone(),
                g_prev: g,
                x_prev: st.x.clone(),
                m: st.m.clone(),
                bias: st.bias.clone(),
                round: st.round + 1,
            }
        })
        .collect();
    Ok(RoundOutput {
        states: new_states,
        losses,
    })
}
