use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::Serialize;

/// CSV header shared by consensus and training traces.
pub const TRACE_HEADER: &str =
    "round,consensus_error,mean_loss,avg_model_loss,avg_model_accuracy,eta,comm_scalars";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRecord {
    pub round: usize,
    pub consensus_error: f64,
    /// Mean over agents of each agent's local training loss.
    pub mean_loss: Option<f64>,
    pub avg_model_loss: Option<f64>,
    pub avg_model_accuracy: Option<f64>,
    pub eta: Option<f64>,
    /// Scalars transmitted by one agent since round 0.
    pub comm_scalars: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceMeta {
    pub method: String,
    pub topology: String,
    pub n: usize,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricTrace {
    pub meta: TraceMeta,
    pub records: Vec<MetricRecord>,
    /// Set when the run stopped early on a non-finite value.
    pub divergence: Option<String>,
}

impl MetricTrace {
    pub fn new(meta: TraceMeta) -> Self {
        Self {
            meta,
            records: Vec::new(),
            divergence: None,
        }
    }

    pub fn is_divergent(&self) -> bool {
        self.divergence.is_some()
    }

    pub fn last(&self) -> Option<&MetricRecord> {
        self.records.last()
    }

    pub fn at_round(&self, round: usize) -> Option<&MetricRecord> {
        self.records.iter().find(|r| r.round == round)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.records.len() + 1));
        out.push_str(TRACE_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.round,
                r.consensus_error,
                opt(r.mean_loss),
                opt(r.avg_model_loss),
                opt(r.avg_model_accuracy),
                opt(r.eta),
                r.comm_scalars
            );
        }
        out
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `(1/n) Σ_i ‖x_i − x̄‖²` with agents on the rows.
pub fn consensus_error(x: &DMatrix<f64>) -> f64 {
    let (n, d) = x.shape();
    if n == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for k in 0..d {
        let col = x.column(k);
        let mean = col.mean();
        total += col.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    }
    total / n as f64
}

/// [`consensus_error`] over per-agent vectors.
pub fn consensus_error_rows(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    consensus_error(&DMatrix::from_fn(n, d, |i, k| rows[i][k]))
}
