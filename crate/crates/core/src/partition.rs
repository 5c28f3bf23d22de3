//! Label-skewed data partitioning with per-class Dirichlet proportions.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

/// Number of reseeded attempts before a partition is declared infeasible.
pub const MAX_REDRAWS: u64 = 100;

/// Disjoint per-agent sample assignment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Partition {
    pub assignments: Vec<Vec<usize>>,
    pub alpha: f64,
    /// Seed that produced the accepted draw (the requested seed plus redraws).
    pub seed: u64,
}

impl Partition {
    pub fn n_agents(&self) -> usize {
        self.assignments.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.assignments.iter().map(Vec::len).collect()
    }
}

/// Splits samples across agents: for every class independently, draws
/// agent proportions from `Dirichlet(alpha)` and hands out that class's
/// shuffled samples in contiguous blocks.
///
/// If some agent ends up with fewer than `min_per_agent` samples the draw is
/// repeated with `seed + 1`, up to [`MAX_REDRAWS`] times.
pub fn dirichlet_partition(
    labels: &[usize],
    n_agents: usize,
    alpha: f64,
    seed: u64,
    min_per_agent: usize,
) -> Result<Partition> {
    if n_agents == 0 {
        return Err(Error::Partition("n_agents must be positive".into()));
    }
    if n_agents > labels.len() {
        return Err(Error::Partition(format!(
            "{n_agents} agents but only {} samples",
            labels.len()
        )));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Partition(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut by_class = vec![Vec::new(); n_classes];
    for (idx, &c) in labels.iter().enumerate() {
        by_class[c].push(idx);
    }

    for attempt in 0..=MAX_REDRAWS {
        let draw_seed = seed.wrapping_add(attempt);
        let assignments = draw(&by_class, n_agents, alpha, draw_seed);
        if assignments.iter().all(|a| a.len() >= min_per_agent) {
            return Ok(Partition {
                assignments,
                alpha,
                seed: draw_seed,
            });
        }
    }
    Err(Error::Partition(format!(
        "alpha={alpha} with {n_agents} agents could not give every agent {min_per_agent} \
         samples after {MAX_REDRAWS} redraws"
    )))
}

fn draw(by_class: &[Vec<usize>], n_agents: usize, alpha: f64, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = rng::global(seed, Purpose::Partition);
    let mut assignments = vec![Vec::new(); n_agents];
    for members in by_class {
        if members.is_empty() {
            continue;
        }
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut rng);
        let proportions = sample_dirichlet(&mut rng, alpha, n_agents);
        let counts = largest_remainder(&proportions, shuffled.len());
        let mut start = 0;
        for (agent, &count) in counts.iter().enumerate() {
            assignments[agent].extend_from_slice(&shuffled[start..start + count]);
            start += count;
        }
    }
    for a in &mut assignments {
        a.sort_unstable();
    }
    assignments
}

/// Symmetric Dirichlet sample computed in log space.
///
/// For shape `a < 1` the gamma variate is `Gamma(a + 1) · U^(1/a)`; taking
/// logs keeps tiny concentrations (1e-6 and below) from underflowing to an
/// all-zero vector.
pub fn sample_dirichlet<R: Rng + ?Sized>(rng: &mut R, alpha: f64, k: usize) -> Vec<f64> {
    let boosted = alpha < 1.0;
    let shape = if boosted { alpha + 1.0 } else { alpha };
    let gamma = Gamma::new(shape, 1.0).expect("positive shape");
    let logs: Vec<f64> = (0..k)
        .map(|_| {
            let g: f64 = gamma.sample(rng);
            let mut lg = g.ln();
            if boosted {
                let u: f64 = rng.random::<f64>();
                lg += u.max(f64::MIN_POSITIVE).ln() / alpha;
            }
            lg
        })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Integer counts summing to `total` whose shares best match `proportions`.
pub fn largest_remainder(proportions: &[f64], total: usize) -> Vec<usize> {
    let raw: Vec<f64> = proportions.iter().map(|p| p * total as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..proportions.len()).collect();
    // Stable on ties, so lower agent index wins.
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())));
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Per-agent class counts and the mean label skew.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    /// `counts[agent][class]`.
    pub counts: Vec<Vec<usize>>,
    /// Mean over non-empty agents of `1 - H(labels) / ln(classes)`.
    pub skew: f64,
}

impl Histogram {
    pub fn to_csv(&self) -> String {
        let n_classes = self.counts.first().map_or(0, Vec::len);
        let mut out = String::from("agent");
        for c in 0..n_classes {
            out.push_str(&format!(",class_{c}"));
        }
        out.push('\n');
        for (agent, row) in self.counts.iter().enumerate() {
            out.push_str(&agent.to_string());
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

pub fn partition_histogram(p: &Partition, labels: &[usize]) -> Result<Histogram> {
    let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut counts = vec![vec![0usize; n_classes]; p.n_agents()];
    for (agent, idxs) in p.assignments.iter().enumerate() {
        for &i in idxs {
            let label = *labels.get(i).ok_or_else(|| {
                Error::Partition(format!(
                    "index {i} out of range for {} labels",
                    labels.len()
                ))
            })?;
            counts[agent][label] += 1;
        }
    }
    let skew = if n_classes < 2 {
        0.0
    } else {
        let max_entropy = (n_classes as f64).ln();
        let per_agent: Vec<f64> = counts
            .iter()
            .filter_map(|row| {
                let total: usize = row.iter().sum();
                if total == 0 {
                    return None;
                }
                let h: f64 = row
                    .iter()
                    .filter(|&&c| c > 0)
                    .map(|&c| {
                        let q = c as f64 / total as f64;
                        -q * q.ln()
                    })
                    .sum();
                Some(1.0 - h / max_entropy)
            })
            .collect();
        if per_agent.is_empty() {
            0.0
        } else {
            per_agent.iter().sum::<f64>() / per_agent.len() as f64
        }
    };
    Ok(Histogram { counts, skew })
}
