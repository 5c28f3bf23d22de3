//! Synchronous-round update rules for decentralized learning.
//!
//! Each rule is a pure transition `(states, round inputs) -> states'`. Within a
//! round, per-agent work (gradient, tracking variable) runs in parallel; the
//! exchange of transmitted vectors acts as a barrier; state updates then run
//! in parallel again. Randomness lives entirely in the gradient oracle, keyed
//! by `(agent, round)`, so trajectories do not depend on thread count.

mod baseline;
mod forms;
mod gut;
mod vecops;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use baseline::{baseline_round, gradient_tracking_round};
pub use forms::{
    bias_form_round, gut_form_round, matrix_form_round, BiasState, GutForm, MatrixState,
};
pub use gut::{gut_round, memeff_round, qg_gutm_round, rule_round};

use crate::error::{Error, Result};
use crate::models::GradientOracle;
use crate::topology::MixingMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AlgorithmKind {
    #[serde(rename = "DSGD")]
    Dsgd,
    #[serde(rename = "DSGDm")]
    Dsgdm,
    #[serde(rename = "DSGDmN")]
    DsgdmN,
    #[serde(rename = "QG-DSGDm")]
    QgDsgdm,
    #[serde(rename = "QG-DSGDmN")]
    QgDsgdmN,
    #[serde(rename = "GT")]
    Gt,
    #[serde(rename = "GUT")]
    Gut,
    #[serde(rename = "GUTm")]
    Gutm,
    #[serde(rename = "GUTmN")]
    GutmN,
    #[serde(rename = "QG-GUTm")]
    QgGutm,
    #[serde(rename = "QG-GUTmN")]
    QgGutmN,
    #[serde(rename = "QG-GUTm-impl")]
    QgGutmImpl,
    #[serde(rename = "GUT-matrix")]
    GutMatrix,
    #[serde(rename = "GUT-bias")]
    GutBias,
    #[serde(rename = "GUT-memeff")]
    GutMemeff,
    #[serde(rename = "RuleA")]
    RuleA,
    #[serde(rename = "RuleB")]
    RuleB,
}

impl AlgorithmKind {
    pub const ALL: [AlgorithmKind; 17] = [
        AlgorithmKind::Dsgd,
        AlgorithmKind::Dsgdm,
        AlgorithmKind::DsgdmN,
        AlgorithmKind::QgDsgdm,
        AlgorithmKind::QgDsgdmN,
        AlgorithmKind::Gt,
        AlgorithmKind::Gut,
        AlgorithmKind::Gutm,
        AlgorithmKind::GutmN,
        AlgorithmKind::QgGutm,
        AlgorithmKind::QgGutmN,
        AlgorithmKind::QgGutmImpl,
        AlgorithmKind::GutMatrix,
        AlgorithmKind::GutBias,
        AlgorithmKind::GutMemeff,
        AlgorithmKind::RuleA,
        AlgorithmKind::RuleB,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AlgorithmKind::Dsgd => "DSGD",
            AlgorithmKind::Dsgdm => "DSGDm",
            AlgorithmKind::DsgdmN => "DSGDmN",
            AlgorithmKind::QgDsgdm => "QG-DSGDm",
            AlgorithmKind::QgDsgdmN => "QG-DSGDmN",
            AlgorithmKind::Gt => "GT",
            AlgorithmKind::Gut => "GUT",
            AlgorithmKind::Gutm => "GUTm",
            AlgorithmKind::GutmN => "GUTmN",
            AlgorithmKind::QgGutm => "QG-GUTm",
            AlgorithmKind::QgGutmN => "QG-GUTmN",
            AlgorithmKind::QgGutmImpl => "QG-GUTm-impl",
            AlgorithmKind::GutMatrix => "GUT-matrix",
            AlgorithmKind::GutBias => "GUT-bias",
            AlgorithmKind::GutMemeff => "GUT-memeff",
            AlgorithmKind::RuleA => "RuleA",
            AlgorithmKind::RuleB => "RuleB",
        }
    }

    /// Kinds whose name carries the Nesterov suffix.
    pub fn is_nesterov_variant(self) -> bool {
        matches!(
            self,
            AlgorithmKind::DsgdmN
                | AlgorithmKind::QgDsgdmN
                | AlgorithmKind::GutmN
                | AlgorithmKind::QgGutmN
        )
    }

    /// Kinds that evaluate gradients at the mixed point and track updates.
    pub fn is_gut_family(self) -> bool {
        matches!(
            self,
            AlgorithmKind::Gut
                | AlgorithmKind::Gutm
                | AlgorithmKind::GutmN
                | AlgorithmKind::QgGutm
                | AlgorithmKind::QgGutmN
                | AlgorithmKind::QgGutmImpl
                | AlgorithmKind::GutMatrix
                | AlgorithmKind::GutBias
                | AlgorithmKind::GutMemeff
        )
    }

    /// Scalars sent per neighbor per round, in units of `d`.
    pub fn comm_multiplier(self) -> u64 {
        match self {
            AlgorithmKind::Gt => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgorithmKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let wanted = s.trim();
        AlgorithmKind::ALL
            .iter()
            .copied()
            .find(|k| k.name().eq_ignore_ascii_case(wanted))
            .ok_or_else(|| {
                let names: Vec<&str> = AlgorithmKind::ALL.iter().map(|k| k.name()).collect();
                Error::Hyperparameter(format!(
                    "unknown algorithm '{s}' (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

/// Step size as a function of the round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum StepSchedule {
    Constant {
        eta: f64,
    },
    /// `eta = base · factor^k` where `k` counts milestones `<= round`.
    Step {
        base: f64,
        milestones: Vec<usize>,
        factor: f64,
    },
}

impl StepSchedule {
    pub fn constant(eta: f64) -> Self {
        StepSchedule::Constant { eta }
    }

    /// 10× decay after 50% and 75% of `rounds`.
    pub fn decay_at_half_and_three_quarters(base: f64, rounds: usize) -> Self {
        StepSchedule::Step {
            base,
            milestones: vec![rounds / 2, rounds * 3 / 4],
            factor: 0.1,
        }
    }

    pub fn eta(&self, round: usize) -> f64 {
        match self {
            StepSchedule::Constant { eta } => *eta,
            StepSchedule::Step {
                base,
                milestones,
                factor,
            } => {
                let k = milestones.iter().filter(|&&m| m <= round).count();
                base * factor.powi(k as i32)
            }
        }
    }

    pub fn base(&self) -> f64 {
        match self {
            StepSchedule::Constant { eta } => *eta,
            StepSchedule::Step { base, .. } => *base,
        }
    }
}

/// Algorithm choice plus its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSpec {
    pub kind: AlgorithmKind,
    pub eta: StepSchedule,
    /// Scaling of the tracking correction.
    pub mu: f64,
    /// Momentum coefficient.
    pub beta: f64,
    pub nesterov: bool,
}

impl AlgorithmSpec {
    pub fn new(kind: AlgorithmKind, eta: f64, mu: f64, beta: f64) -> Self {
        Self {
            kind,
            eta: StepSchedule::constant(eta),
            mu,
            beta,
            nesterov: false,
        }
    }

    pub fn with_schedule(mut self, eta: StepSchedule) -> Self {
        self.eta = eta;
        self
    }

    pub fn uses_nesterov(&self) -> bool {
        self.nesterov || self.kind.is_nesterov_variant()
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.mu) {
            return Err(Error::Hyperparameter(format!(
                "mu must be in [0, 1), got {}",
                self.mu
            )));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::Hyperparameter(format!(
                "beta must be in [0, 1), got {}",
                self.beta
            )));
        }
        let ok = match &self.eta {
            StepSchedule::Constant { eta } => *eta > 0.0 && eta.is_finite(),
            StepSchedule::Step { base, factor, .. } => {
                *base > 0.0 && base.is_finite() && *factor > 0.0 && factor.is_finite()
            }
        };
        if !ok {
            return Err(Error::Hyperparameter(format!(
                "step size must stay positive: {:?}",
                self.eta
            )));
        }
        Ok(())
    }
}

/// One agent's full state between rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub x: Vec<f64>,
    /// Weighted neighborhood aggregate `Σ_j w_ij x̂_j`.
    pub s: Vec<f64>,
    /// Copies `x̂_j` of every neighbor except self, in the order of
    /// [`MixingMatrix::neighbors`].
    pub copies: Vec<Vec<f64>>,
    /// Vector this agent transmitted last round (`y` for GUT, the momentum
    /// buffer for the quasi-global variants, the tracking variable for GT).
    pub y_prev: Vec<f64>,
    pub delta_prev: Vec<f64>,
    /// Previous gradient (GT and the matrix form).
    pub g_prev: Vec<f64>,
    /// Previous parameters (Rule-b and the matrix form).
    pub x_prev: Vec<f64>,
    pub m: Vec<f64>,
    /// Bias column for the bias-correction form.
    pub bias: Vec<f64>,
    pub round: usize,
}

impl AgentState {
    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// Initial states for `spec.kind`, agents on the rows of `x0`.
///
/// Auxiliary buffers start at zero and `x_prev = x0`. Two forms need history
/// consistent with a zero previous `δ` so they stay on the same trajectory as
/// the per-agent algorithm for any starting point: the matrix form starts
/// from `x_prev = 0`, and the bias form from `b = −(s − x)/η`, which is zero
/// whenever the agents start synchronized.
pub fn init_states(
    x0: &[Vec<f64>],
    w: &MixingMatrix,
    spec: &AlgorithmSpec,
) -> Result<Vec<AgentState>> {
    let n = w.n();
    if x0.len() != n {
        return Err(Error::Dimension(format!(
            "initial parameters have {} rows, mixing matrix has {n} agents",
            x0.len()
        )));
    }
    let d = x0.first().map_or(0, Vec::len);
    if x0.iter().any(|r| r.len() != d) {
        return Err(Error::Dimension(
            "initial parameter rows differ in length".into(),
        ));
    }
    if x0.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "initial parameters",
            agent: x0
                .iter()
                .position(|r| r.iter().any(|v| !v.is_finite()))
                .unwrap_or(0),
            round: 0,
        });
    }
    spec.validate()?;
    let eta0 = spec.eta.eta(0);
    Ok((0..n)
        .map(|i| {
            let s = w.mix_agent(i, x0);
            let copies = w
                .neighbors(i)
                .iter()
                .filter(|&&(j, _)| j != i)
                .map(|&(j, _)| x0[j].clone())
                .collect();
            let x_prev = match spec.kind {
                AlgorithmKind::GutMatrix => vec![0.0; d],
                _ => x0[i].clone(),
            };
            let bias = match spec.kind {
                AlgorithmKind::GutBias => s
                    .iter()
                    .zip(&x0[i])
                    .map(|(si, xi)| -(si - xi) / eta0)
                    .collect(),
                _ => vec![0.0; d],
            };
            AgentState {
                x: x0[i].clone(),
                s,
                copies,
                y_prev: vec![0.0; d],
                delta_prev: vec![0.0; d],
                g_prev: vec![0.0; d],
                x_prev,
                m: vec![0.0; d],
                bias,
                round: 0,
            }
        })
        .collect())
}

/// Result of one synchronous round.
#[derive(Debug, Clone)]
pub struct RoundOutput {
    pub states: Vec<AgentState>,
    /// Minibatch loss reported by each agent's gradient oracle.
    pub losses: Vec<f64>,
}

/// Runs one round of whichever rule `spec.kind` selects.
pub fn step(
    states: &[AgentState],
    w: &MixingMatrix,
    spec: &AlgorithmSpec,
    oracle: &dyn GradientOracle,
) -> Result<RoundOutput> {
    check_round_inputs(states, w)?;
    match spec.kind {
        AlgorithmKind::Dsgd
        | AlgorithmKind::Dsgdm
        | AlgorithmKind::DsgdmN
        | AlgorithmKind::QgDsgdm
        | AlgorithmKind::QgDsgdmN => baseline_round(states, w, spec, oracle),
        AlgorithmKind::Gt => gradient_tracking_round(states, w, spec, oracle),
        AlgorithmKind::Gut | AlgorithmKind::Gutm | AlgorithmKind::GutmN => {
            gut_round(states, w, spec, oracle)
        }
        AlgorithmKind::QgGutm | AlgorithmKind::QgGutmN | AlgorithmKind::QgGutmImpl => {
            qg_gutm_round(states, w, spec, oracle)
        }
        AlgorithmKind::RuleA | AlgorithmKind::RuleB => rule_round(states, w, spec, oracle),
        AlgorithmKind::GutMatrix => gut_form_round(states, w, spec, oracle, GutForm::Matrix),
        AlgorithmKind::GutBias => gut_form_round(states, w, spec, oracle, GutForm::Bias),
        AlgorithmKind::GutMemeff => {
            gut_form_round(states, w, spec, oracle, GutForm::MemoryEfficient)
        }
    }
}

pub(crate) fn check_round_inputs(states: &[AgentState], w: &MixingMatrix) -> Result<()> {
    if states.len() != w.n() {
        return Err(Error::Dimension(format!(
            "{} agent states for a {}-agent mixing matrix",
            states.len(),
            w.n()
        )));
    }
    if let Some(first) = states.first() {
        if states
            .iter()
            .any(|s| s.round != first.round || s.dim() != first.dim())
        {
            return Err(Error::Dimension(
                "agents are not synchronized (round or dimension differs)".into(),
            ));
        }
    }
    Ok(())
}

pub(crate) fn expect_kind(spec: &AlgorithmSpec, allowed: &[AlgorithmKind], op: &str) -> Result<()> {
    if allowed.contains(&spec.kind) {
        Ok(())
    } else {
        Err(Error::Hyperparameter(format!(
            "{op} cannot run algorithm {}",
            spec.kind
        )))
    }
}

/// Scalars one agent transmits per round: `degree × d × multiplier`, where
/// the multiplier is 2 for gradient tracking and 1 otherwise. Uses the
/// largest degree, which is every agent's degree on the built-in graphs.
pub fn comm_cost(spec: &AlgorithmSpec, d: usize, w: &MixingMatrix) -> u64 {
    w.max_degree() as u64 * d as u64 * spec.kind.comm_multiplier()
}

/// Outcome of checking step size and scaling factor against the convergence regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HyperparameterCheck {
    pub eta_ok: bool,
    pub mu_ok: bool,
    pub eta_max: f64,
    pub mu_max: f64,
}

impl HyperparameterCheck {
    pub fn compliant(&self) -> bool {
        self.eta_ok && self.mu_ok
    }
}

/// Bounds `η ≤ ρ/(7L)` and `μ/(1−μ) ≤ ρ/42`, i.e. `μ ≤ ρ/(42+ρ)`.
///
/// Advisory only: runs outside the regime are allowed.
pub fn validate_hyperparameters(
    eta: f64,
    mu: f64,
    rho: f64,
    smoothness: f64,
) -> HyperparameterCheck {
    let eta_max = rho / (7.0 * smoothness);
    let mu_max = rho / (42.0 + rho);
    HyperparameterCheck {
        eta_ok: eta <= eta_max,
        mu_ok: mu == 0.0 || mu <= mu_max,
        eta_max,
        mu_max,
    }
}
