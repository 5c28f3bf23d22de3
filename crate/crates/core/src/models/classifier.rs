//! Gaussian-cluster classification data and two small models trained on it:
//! multinomial logistic regression and a one-hidden-layer tanh network.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::rng::{self, Purpose};

/// Row-major feature table with integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: usize,
    pub x: Vec<f64>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.features..(i + 1) * self.features]
    }
}

/// Class centers drawn from `N(0, separation²·I)`.
#[derive(Debug, Clone)]
pub struct GaussianClusters {
    pub centers: Vec<Vec<f64>>,
}

impl GaussianClusters {
    pub fn new(classes: usize, features: usize, separation: f64, seed: u64) -> Self {
        let mut rng = rng::global(seed, Purpose::Data);
        let centers = (0..classes)
            .map(|_| {
                (0..features)
                    .map(|_| separation * Distribution::<f64>::sample(&StandardNormal, &mut rng))
                    .collect()
            })
            .collect();
        Self { centers }
    }

    /// Balanced sample: label `i % classes` for sample `i`, unit-variance noise.
    pub fn sample(&self, samples: usize, seed: u64, stream: usize) -> Dataset {
        let classes = self.centers.len();
        let features = self.centers.first().map_or(0, Vec::len);
        let mut rng = rng::substream(seed, Purpose::Data, stream, 0);
        let mut x = Vec::with_capacity(samples * features);
        let mut labels = Vec::with_capacity(samples);
        for i in 0..samples {
            let c = i % classes;
            labels.push(c);
            for &m in &self.centers[c] {
                let z: f64 = StandardNormal.sample(&mut rng);
                x.push(m + z);
            }
        }
        Dataset {
            features,
            x,
            labels,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    /// Parameters: `W (classes × features)` then `b (classes)`.
    Softmax,
    /// Parameters: `W1 (hidden × features)`, `b1`, `W2 (classes × hidden)`, `b2`.
    Mlp { hidden: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Model {
    pub arch: Architecture,
    pub features: usize,
    pub classes: usize,
}

impl Model {
    pub fn dim(&self) -> usize {
        let (p, k) = (self.features, self.classes);
        match self.arch {
            Architecture::Softmax => k * p + k,
            Architecture::Mlp { hidden: h } => h * p + h + k * h + k,
        }
    }

    /// Small Gaussian initialization; the MLP needs it to break symmetry.
    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self.arch {
            Architecture::Softmax => vec![0.0; self.dim()],
            Architecture::Mlp { hidden } => {
                let s1 = 1.0 / (self.features as f64).sqrt();
                let s2 = 1.0 / (hidden as f64).sqrt();
                let (w1, b1, w2, _) = self.mlp_offsets(hidden);
                let mut p = vec![0.0; self.dim()];
                for v in &mut p[w1..b1] {
                    *v = s1 * Distribution::<f64>::sample(&StandardNormal, rng);
                }
                for v in &mut p[w2..w2 + self.classes * hidden] {
                    *v = s2 * Distribution::<f64>::sample(&StandardNormal, rng);
                }
                p
            }
        }
    }

    fn mlp_offsets(&self, hidden: usize) -> (usize, usize, usize, usize) {
        let w1 = 0;
        let b1 = hidden * self.features;
        let w2 = b1 + hidden;
        let b2 = w2 + self.classes * hidden;
        (w1, b1, w2, b2)
    }

    /// Output logits for one sample; `hidden_out` receives the tanh layer.
    fn forward(&self, params: &[f64], x: &[f64], hidden_out: &mut Vec<f64>) -> Vec<f64> {
        let (p, k) = (self.features, self.classes);
        match self.arch {
            Architecture::Softmax => {
                let bias = &params[k * p..];
                (0..k)
                    .map(|c| dot(&params[c * p..(c + 1) * p], x) + bias[c])
                    .collect()
            }
            Architecture::Mlp { hidden: h } => {
                let (w1, b1, w2, b2) = self.mlp_offsets(h);
                hidden_out.clear();
                hidden_out.extend((0..h).map(|j| {
                    (dot(&params[w1 + j * p..w1 + (j + 1) * p], x) + params[b1 + j]).tanh()
                }));
                (0..k)
                    .map(|c| {
                        dot(&params[w2 + c * h..w2 + (c + 1) * h], hidden_out) + params[b2 + c]
                    })
                    .collect()
            }
        }
    }

    /// Cross-entropy of one sample; adds its gradient scaled by `scale` into `grad`.
    fn sample_loss_grad(
        &self,
        params: &[f64],
        x: &[f64],
        label: usize,
        scale: f64,
        grad: Option<&mut [f64]>,
        hidden: &mut Vec<f64>,
    ) -> f64 {
        let logits = self.forward(params, x, hidden);
        let (lse, probs) = log_softmax(&logits);
        let loss = lse - logits[label];
        let Some(grad) = grad else {
            return loss;
        };
        let (p, k) = (self.features, self.classes);
        let dz: Vec<f64> = (0..k)
            .map(|c| scale * (probs[c] - if c == label { 1.0 } else { 0.0 }))
            .collect();
        match self.arch {
            Architecture::Softmax => {
                for c in 0..k {
                    axpy(dz[c], x, &mut grad[c * p..(c + 1) * p]);
                    grad[k * p + c] += dz[c];
                }
            }
            Architecture::Mlp { hidden: h } => {
                let (w1, b1, w2, b2) = self.mlp_offsets(h);
                let mut dh = vec![0.0; h];
                for c in 0..k {
                    axpy(dz[c], hidden, &mut grad[w2 + c * h..w2 + (c + 1) * h]);
                    grad[b2 + c] += dz[c];
                    axpy(dz[c], &params[w2 + c * h..w2 + (c + 1) * h], &mut dh);
                }
                for j in 0..h {
                    let da = dh[j] * (1.0 - hidden[j] * hidden[j]);
                    axpy(da, x, &mut grad[w1 + j * p..w1 + (j + 1) * p]);
                    grad[b1 + j] += da;
                }
            }
        }
        loss
    }

    /// Mean cross-entropy and gradient over `indices` of `data`.
    pub fn loss_grad(&self, params: &[f64], data: &Dataset, indices: &[usize]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.dim()];
        if indices.is_empty() {
            return (0.0, grad);
        }
        let scale = 1.0 / indices.len() as f64;
        let mut hidden = Vec::new();
        let mut loss = 0.0;
        for &i in indices {
            loss += self.sample_loss_grad(
                params,
                data.row(i),
                data.labels[i],
                scale,
                Some(&mut grad),
                &mut hidden,
            );
        }
        (loss * scale, grad)
    }

    pub fn loss(&self, params: &[f64], data: &Dataset, indices: &[usize]) -> f64 {
        if indices.is_empty() {
            return 0.0;
        }
        let mut hidden = Vec::new();
        let total: f64 = indices
            .iter()
            .map(|&i| {
                self.sample_loss_grad(params, data.row(i), data.labels[i], 0.0, None, &mut hidden)
            })
            .sum();
        total / indices.len() as f64
    }

    /// Mean loss and accuracy over the whole dataset.
    pub fn evaluate(&self, params: &[f64], data: &Dataset) -> (f64, f64) {
        let mut hidden = Vec::new();
        let mut loss = 0.0;
        let mut correct = 0usize;
        for i in 0..data.len() {
            let logits = self.forward(params, data.row(i), &mut hidden);
            let (lse, _) = log_softmax(&logits);
            loss += lse - logits[data.labels[i]];
            if argmax(&logits) == data.labels[i] {
                correct += 1;
            }
        }
        let n = data.len() as f64;
        (loss / n, correct as f64 / n)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `(logsumexp(z), softmax(z))`.
fn log_softmax(z: &[f64]) -> (f64, Vec<f64>) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    (max + sum.ln(), exps.into_iter().map(|e| e / sum).collect())
}

/// First index of the maximum.
fn argmax(z: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in z.iter().enumerate() {
        if v > z[best] {
            best = i;
        }
    }
    best
}
