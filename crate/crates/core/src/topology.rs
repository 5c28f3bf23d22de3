//! Communication graphs and their doubly stochastic mixing matrices.
//!
//! Every built-in graph uses uniform weights: each agent gives weight
//! `1 / (degree + 1)` to itself and to every neighbor. Mixing is applied
//! through sparse neighbor lists, so a round on a ring costs `O(n·d)` rather
//! than `O(n²·d)`.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for row and column sums.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Chords added to the 32-ring to form the Dyck graph, 1-indexed.
pub const DYCK_CHORDS: [(usize, usize); 16] = [
    (1, 20),
    (4, 17),
    (9, 28),
    (12, 25),
    (5, 24),
    (8, 21),
    (13, 32),
    (16, 29),
    (2, 7),
    (6, 11),
    (10, 15),
    (14, 19),
    (18, 23),
    (22, 27),
    (26, 31),
    (3, 30),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopologyKind {
    Ring,
    Dyck,
    Torus,
    /// Anything built from raw weights.
    Custom,
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TopologyKind::Ring => "ring",
            TopologyKind::Dyck => "dyck",
            TopologyKind::Torus => "torus",
            TopologyKind::Custom => "custom",
        };
        f.write_str(s)
    }
}

impl FromStr for TopologyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ring" => Ok(TopologyKind::Ring),
            "dyck" => Ok(TopologyKind::Dyck),
            "torus" => Ok(TopologyKind::Torus),
            other => Err(Error::Topology(format!(
                "unknown topology kind '{other}' (expected ring, dyck or torus)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralStats {
    pub lambda2: f64,
    #[serde(rename = "lambdaN")]
    pub lambda_n: f64,
    pub rho: f64,
}

/// Symmetric doubly stochastic gossip weights.
#[derive(Debug, Clone)]
pub struct MixingMatrix {
    kind: TopologyKind,
    weights: DMatrix<f64>,
    edges: Vec<(usize, usize)>,
    /// Row `i`: `(j, w_ij)` for every `j` with `w_ij != 0`, self included, sorted by `j`.
    neighbors: Vec<Vec<(usize, f64)>>,
    spectral: OnceLock<SpectralStats>,
}

impl MixingMatrix {
    /// Wraps an arbitrary square matrix. No invariant is checked here; use
    /// [`validate_mixing`] for that.
    pub fn from_weights(weights: DMatrix<f64>) -> Result<Self> {
        if weights.nrows() != weights.ncols() {
            return Err(Error::Dimension(format!(
                "mixing matrix must be square, got {}x{}",
                weights.nrows(),
                weights.ncols()
            )));
        }
        let n = weights.nrows();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if weights[(i, j)] != 0.0 || weights[(j, i)] != 0.0 {
                    edges.push((i, j));
                }
            }
        }
        let neighbors = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| weights[(i, j)] != 0.0)
                    .map(|j| (j, weights[(i, j)]))
                    .collect()
            })
            .collect();
        Ok(Self {
            kind: TopologyKind::Custom,
            weights,
            edges,
            neighbors,
            spectral: OnceLock::new(),
        })
    }

    fn uniform(kind: TopologyKind, n: usize, edges: Vec<(usize, usize)>) -> Self {
        let mut adjacency = vec![vec![false; n]; n];
        for &(a, b) in &edges {
            adjacency[a][b] = true;
            adjacency[b][a] = true;
        }
        let mut weights = DMatrix::zeros(n, n);
        for i in 0..n {
            let peers = 1 + adjacency[i].iter().filter(|&&e| e).count();
            let w = 1.0 / peers as f64;
            weights[(i, i)] = w;
            for j in 0..n {
                if adjacency[i][j] {
                    weights[(i, j)] = w;
                }
            }
        }
        let mut m = Self::from_weights(weights).expect("square by construction");
        m.kind = kind;
        m
    }

    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    /// Undirected edges `(i, j)` with `i < j`; self-loops are implicit.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// `(j, w_ij)` pairs for agent `i`, including `i` itself.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.neighbors[i]
    }

    /// Number of neighbors of `i`, not counting `i`.
    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].iter().filter(|&&(j, _)| j != i).count()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n()).map(|i| self.degree(i)).max().unwrap_or(0)
    }

    /// `Σ_j w_ij v_j` for agent `i`, summed in ascending `j`.
    pub fn mix_agent<V: AsRef<[f64]>>(&self, i: usize, vectors: &[V]) -> Vec<f64> {
        let d = vectors.first().map_or(0, |v| v.as_ref().len());
        let mut out = vec![0.0; d];
        for &(j, w) in &self.neighbors[i] {
            for (o, v) in out.iter_mut().zip(vectors[j].as_ref()) {
                *o += w * v;
            }
        }
        out
    }

    /// `W·X` with agents on the rows of `x`.
    pub fn mix_rows(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let (n, d) = x.shape();
        assert_eq!(n, self.n(), "row count must equal agent count");
        let mut out = DMatrix::zeros(n, d);
        for i in 0..n {
            for &(j, w) in &self.neighbors[i] {
                for k in 0..d {
                    out[(i, k)] += w * x[(j, k)];
                }
            }
        }
        out
    }

    /// Eigenvalue summary; computed once and cached.
    pub fn spectral_stats(&self) -> Result<SpectralStats> {
        if let Some(s) = self.spectral.get() {
            return Ok(*s);
        }
        let stats = compute_spectral(&self.weights)?;
        Ok(*self.spectral.get_or_init(|| stats))
    }

    pub fn rho(&self) -> Result<f64> {
        self.spectral_stats().map(|s| s.rho)
    }

    /// CSV with one row per agent, 17 significant digits per entry.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.n() {
            let row: Vec<String> = (0..self.n())
                .map(|j| format!("{:.16e}", self.weights[(i, j)]))
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Builds one of the built-in graphs with uniform weights.
///
/// `grid` only applies to the torus; when omitted, the most square
/// factorization of `n` with both sides at least 3 is used.
pub fn build_topology(
    kind: TopologyKind,
    n: usize,
    grid: Option<(usize, usize)>,
) -> Result<MixingMatrix> {
    match kind {
        TopologyKind::Ring => {
            if n < 3 {
                return Err(Error::Topology(format!("ring needs n >= 3, got {n}")));
            }
            let edges = (0..n).map(|i| ordered(i, (i + 1) % n)).collect();
            Ok(MixingMatrix::uniform(kind, n, edges))
        }
        TopologyKind::Dyck => {
            if n != 32 {
                return Err(Error::Topology(format!(
                    "the Dyck graph is fixed at 32 agents, got {n}"
                )));
            }
            let mut edges: Vec<_> = (0..n).map(|i| ordered(i, (i + 1) % n)).collect();
            edges.extend(DYCK_CHORDS.iter().map(|&(a, b)| ordered(a - 1, b - 1)));
            Ok(MixingMatrix::uniform(kind, n, edges))
        }
        TopologyKind::Torus => {
            let (rows, cols) = match grid {
                Some(g) => g,
                None => square_factorization(n).ok_or_else(|| {
                    Error::Topology(format!(
                        "torus: {n} has no factorization rows*cols with rows, cols >= 3"
                    ))
                })?,
            };
            if rows < 3 || cols < 3 {
                return Err(Error::Topology(format!(
                    "torus grid needs rows, cols >= 3, got {rows}x{cols}"
                )));
            }
            if rows * cols != n {
                return Err(Error::Topology(format!(
                    "torus grid {rows}x{cols} does not hold {n} agents"
                )));
            }
            let id = |r: usize, c: usize| r * cols + c;
            let mut edges = Vec::with_capacity(2 * n);
            for r in 0..rows {
                for c in 0..cols {
                    edges.push(ordered(id(r, c), id(r, (c + 1) % cols)));
                    edges.push(ordered(id(r, c), id((r + 1) % rows, c)));
                }
            }
            Ok(MixingMatrix::uniform(kind, n, edges))
        }
        TopologyKind::Custom => Err(Error::Topology(
            "custom topologies are built with MixingMatrix::from_weights".into(),
        )),
    }
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Most square `(rows, cols)` with `rows <= cols`, `rows * cols = n`, both >= 3.
pub fn square_factorization(n: usize) -> Option<(usize, usize)> {
    (3..=n)
        .take_while(|r| r * r <= n)
        .filter(|r| n.is_multiple_of(*r) && n / r >= 3)
        .last()
        .map(|r| (r, n / r))
}

fn compute_spectral(weights: &DMatrix<f64>) -> Result<SpectralStats> {
    let n = weights.nrows();
    if n == 0 {
        return Err(Error::Spectral("empty matrix".into()));
    }
    if n == 1 {
        return Ok(SpectralStats {
            lambda2: 0.0,
            lambda_n: weights[(0, 0)],
            rho: 1.0,
        });
    }
    // The symmetric solver reads only the lower triangle, so symmetrize first.
    let sym = (weights + weights.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, 1e-15, 100_000)
        .ok_or_else(|| Error::Spectral(format!("no convergence for {n}x{n} matrix")))?;
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    let lambda2 = values[1];
    let lambda_n = values[n - 1];
    let rho = 1.0 - lambda2.abs().max(lambda_n.abs());
    Ok(SpectralStats {
        lambda2,
        lambda_n,
        rho,
    })
}

/// One violated mixing-matrix requirement.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    RowSum { row: usize, sum: f64 },
    ColumnSum { col: usize, sum: f64 },
    Asymmetric { i: usize, j: usize },
    Negative { i: usize, j: usize, value: f64 },
    Disconnected { components: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RowSum { row, sum } => write!(f, "row {row} sums to {sum}"),
            Violation::ColumnSum { col, sum } => write!(f, "column {col} sums to {sum}"),
            Violation::Asymmetric { i, j } => write!(f, "w[{i},{j}] != w[{j},{i}]"),
            Violation::Negative { i, j, value } => write!(f, "w[{i},{j}] = {value} < 0"),
            Violation::Disconnected { components } => {
                write!(f, "graph has {components} connected components")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_compliant(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has_column_violation(&self) -> bool {
        self.violations
            .iter()
            .any(|v| matches!(v, Violation::ColumnSum { .. }))
    }

    pub fn has_negative(&self) -> bool {
        self.violations
            .iter()
            .any(|v| matches!(v, Violation::Negative { .. }))
    }

    pub fn is_disconnected(&self) -> bool {
        self.violations
            .iter()
            .any(|v| matches!(v, Violation::Disconnected { .. }))
    }
}

/// Checks every mixing-matrix requirement and lists all failures.
pub fn validate_mixing(w: &MixingMatrix) -> ValidationReport {
    let m = w.weights();
    let n = m.nrows();
    let mut violations = Vec::new();
    for i in 0..n {
        let sum: f64 = m.row(i).iter().sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            violations.push(Violation::RowSum { row: i, sum });
        }
    }
    for j in 0..n {
        let sum: f64 = m.column(j).iter().sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            violations.push(Violation::ColumnSum { col: j, sum });
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if m[(i, j)] != m[(j, i)] {
                violations.push(Violation::Asymmetric { i, j });
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            if m[(i, j)] < 0.0 {
                violations.push(Violation::Negative {
                    i,
                    j,
                    value: m[(i, j)],
                });
            }
        }
    }
    let components = count_components(m);
    if components > 1 {
        violations.push(Violation::Disconnected { components });
    }
    ValidationReport { violations }
}

fn count_components(m: &DMatrix<f64>) -> usize {
    let n = m.nrows();
    let mut seen = vec![false; n];
    let mut components = 0;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            for j in 0..n {
                if !seen[j] && (m[(i, j)] > 0.0 || m[(j, i)] > 0.0) {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    components
}
