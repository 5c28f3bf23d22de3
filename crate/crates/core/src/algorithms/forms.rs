//! Whole-network formulations of GUT with agents on matrix rows.
//!
//! * Matrix form: `Y^t = G^t − (W−I)X^t/η + μ[W Y^{t−1} − G^{t−1} − (W−I)(X^t − X^{t−1})/η]`,
//!   `X^{t+1} = X^t − η Y^t`.
//! * Bias form: `X^{t+1} = W X^t − η(G^t + μ B^t)`,
//!   `B^{t+1} = −[(2W−I)(X^{t+1} − X^t) + η G^t]/η`.
//!
//! With gradients taken at `W X^t` both reproduce the per-agent algorithm.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::models::GradientOracle;
use crate::topology::MixingMatrix;

use super::gut::memeff_round;
use super::{expect_kind, AgentState, AlgorithmKind, AlgorithmSpec, RoundOutput};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GutForm {
    Matrix,
    Bias,
    MemoryEfficient,
}

/// State carried by the matrix form.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixState {
    pub x: DMatrix<f64>,
    pub y_prev: DMatrix<f64>,
    pub g_prev: DMatrix<f64>,
    pub x_prev: DMatrix<f64>,
    pub round: usize,
}

/// State carried by the bias form.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasState {
    pub x: DMatrix<f64>,
    pub bias: DMatrix<f64>,
    pub round: usize,
}

fn gradients(
    oracle: &dyn GradientOracle,
    mixed: &DMatrix<f64>,
    round: usize,
) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let (n, d) = mixed.shape();
    let rows = (0..n)
        .into_par_iter()
        .map(|i| {
            let point: Vec<f64> = mixed.row(i).iter().copied().collect();
            let (loss, g) = oracle.gradient(i, round, &point)?;
            if g.len() != d {
                return Err(Error::Dimension(format!(
                    "oracle returned {} entries for dimension {d}",
                    g.len()
                )));
            }
            Ok((loss, g))
        })
        .collect::<Result<Vec<_>>>()?;
    let losses = rows.iter().map(|r| r.0).collect();
    let g = DMatrix::from_fn(n, d, |i, k| rows[i].1[k]);
    Ok((g, losses))
}

fn check_finite(m: &DMatrix<f64>, what: &'static str, round: usize) -> Result<()> {
    for i in 0..m.nrows() {
        if m.row(i).iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what,
                agent: i,
                round,
            });
        }
    }
    Ok(())
}

/// One round of the matrix form. Returns the new state and minibatch losses.
pub fn matrix_form_round(
    state: &MatrixState,
    w: &MixingMatrix,
    spec: &AlgorithmSpec,
    oracle: &dyn GradientOracle,
) -> Result<(MatrixState, Vec<f64>)> {
    let t = state.round;
    let eta = spec.eta.eta(t);
    let inv = 1.0 / eta;
    let x = &state.x;
    let mixed = w.mix_rows(x);
    let (g, losses) = gradients(oracle, &mixed, t)?;
    let gossip = &mixed - x;
    let moved = x - &state.x_prev;
    let moved_gossip = w.mix_rows(&moved) - &moved;
    let correction = w.mix_rows(&state.y_prev) - &state.g_prev - moved_gossip * inv;
    let y = &g - gossip * inv + correction * spec.mu;
    check_finite(&y, "tracking variable", t)?;
    let next = MatrixState {
        x: x - &y * eta,
        y_prev: y,
        g_prev: g,
        x_prev: x.clone(),
        round: t + 1,
    };
    Ok((next, losses))
}

/// One round of the bias form. Returns the new state and minibatch losses.
pub fn bias_form_round(
    state: &BiasState,
    w: &MixingMatrix,
    spec: &AlgorithmSpec,
    oracle: &dyn GradientOracle,
) -> Result<(BiasState, Vec<f64>)> {
    let t = state.round;
    let eta = spec.eta.eta(t);
    let x = &state.x;
    let mixed = w.mix_rows(x);
    let (g, losses) = gradients(oracle, &mixed, t)?;
    let x_next = &mixed - (&g + &state.bias * spec.mu) * eta;
    check_finite(&x_next, "parameters", t)?;
    let moved = &x_next - x;
    let bias = (w.mix_rows(&moved) * 2.0 - &moved + &g * eta) * (-1.0 / eta);
    Ok((
        BiasState {
            x: x_next,
            bias,
            round: t + 1,
        },
        losses,
    ))
}

fn gather<F>(states: &[AgentState], field: F) -> DMatrix<f64>
where
    F: Fn(&AgentState) -> &[f64],
{
    let n = states.len();
    let d = states.first().map_or(0, AgentState::dim);
    DMatrix::from_fn(n, d, |i, k| field(&states[i])[k])
}

fn row(m: &DMatrix<f64>, i: usize) -> Vec<f64> {
    m.row(i).iter().copied().collect()
}

/// Runs one GUT round in the requested formulation over per-agent states.
pub fn gut_form_round(
    states: &[AgentState],
    w: &MixingMatrix,
    spec: &AlgorithmSpec,
    oracle: &dyn GradientOracle,
    form: GutForm,
) -> Result<RoundOutput> {
    use AlgorithmKind::*;
    let expected = match form {
        GutForm::Matrix => GutMatrix,
        GutForm::Bias => GutBias,
        GutForm::MemoryEfficient => GutMemeff,
    };
    expect_kind(spec, &[expected], "gut_form_round")?;
    let round = states.first().map_or(0, |s| s.round);
    let (xs, extra, losses) = match form {
        GutForm::MemoryEfficient => return memeff_round(states, w, spec, oracle),
        GutForm::Matrix => {
            let state = MatrixState {
                x: gather(states, |s| &s.x),
                y_prev: gather(states, |s| &s.y_prev),
                g_prev: gather(states, |s| &s.g_prev),
                x_prev: gather(states, |s| &s.x_prev),
                round,
            };
            let (next, losses) = matrix_form_round(&state, w, spec, oracle)?;
            (next.x.clone(), Extra::Matrix(next), losses)
        }
        GutForm::Bias => {
            let state = BiasState {
                x: gather(states, |s| &s.x),
                bias: gather(states, |s| &s.bias),
                round,
            };
            let (next, losses) = bias_form_round(&state, w, spec, oracle)?;
            (next.x.clone(), Extra::Bias(next), losses)
        }
    };
    let rows: Vec<Vec<f64>> = (0..states.len()).map(|i| row(&xs, i)).collect();
    let new_states = (0..states.len())
        .map(|i| {
            let old = &states[i];
            let mut next = AgentState {
                x: rows[i].clone(),
                s: w.mix_agent(i, &rows),
                copies: w
                    .neighbors(i)
                    .iter()
                    .filter(|&&(j, _)| j != i)
                    .map(|&(j, _)| rows[j].clone())
                    .collect(),
                round: old.round + 1,
                ..old.clone()
            };
            match &extra {
                Extra::Matrix(m) => {
                    next.y_prev = row(&m.y_prev, i);
                    next.g_prev = row(&m.g_prev, i);
                    next.x_prev = row(&m.x_prev, i);
                }
                Extra::Bias(b) => {
                    next.bias = row(&b.bias, i);
                    next.x_prev = old.x.clone();
                }
            }
            next
        })
        .collect();
    Ok(RoundOutput {
        states: new_states,
        losses,
    })
}

enum Extra {
    Matrix(MatrixState),
    Bias(BiasState),
}
