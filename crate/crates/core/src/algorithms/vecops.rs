use crate::error::{Error, Result};
use crate::topology::MixingMatrix;

use super::AgentState;

/// `a − b`.
pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `x − η·v`.
pub fn step_by(x: &[f64], eta: f64, v: &[f64]) -> Vec<f64> {
    x.iter().zip(v).map(|(a, b)| a - eta * b).collect()
}

/// `β·a + c·b`.
pub fn blend(beta: f64, a: &[f64], c: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| beta * x + c * y).collect()
}

/// Mixed point `Σ_j w_ij x̂_j` from the agent's own parameters and its
/// neighbor copies, summed in ascending neighbor index.
pub fn mixed_from_copies(w: &MixingMatrix, i: usize, state: &AgentState) -> Vec<f64> {
    let mut out = vec![0.0; state.dim()];
    let mut copies = state.copies.iter();
    for &(j, wij) in w.neighbors(i) {
        let v = if j == i {
            &state.x
        } else {
            copies.next().expect("one copy per neighbor")
        };
        for (o, vj) in out.iter_mut().zip(v) {
            *o += wij * vj;
        }
    }
    out
}

/// `Σ_j w_ij v_j` where `v_j` is picked out of agent `j`'s state.
pub fn mix_field<F>(w: &MixingMatrix, i: usize, states: &[AgentState], field: F) -> Vec<f64>
where
    F: Fn(&AgentState) -> &[f64],
{
    let d = states[i].dim();
    let mut out = vec![0.0; d];
    for &(j, wij) in w.neighbors(i) {
        for (o, v) in out.iter_mut().zip(field(&states[j])) {
            *o += wij * v;
        }
    }
    out
}

/// `Σ_j w_ij v_j` over a table of per-agent vectors.
pub fn mix_table(w: &MixingMatrix, i: usize, table: &[Vec<f64>]) -> Vec<f64> {
    w.mix_agent(i, table)
}

pub fn ensure_finite(v: &[f64], what: &'static str, agent: usize, round: usize) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { what, agent, round })
    }
}
