//! Network topologies and combination matrices.
//!
//! A [`CombinationMatrix`] stores the weights `a[l, k]` with the *column*
//! index being the receiving node: column `k` lists the weights node `k`
//! applies to the intermediate estimates of its neighbors `l`,
//!
//! ```text
//! w_k = sum over l in N_k of a[l, k] * phi_l
//! ```
//!
//! so every column sums to one (`1ᵀ Γ = 1ᵀ`) and `a[l, k] = 0` whenever `l`
//! is not a neighbor of `k`.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{seeded, StreamRole};

/// Tolerance on `|column sum - 1|` for a combiner to count as stochastic.
pub const COLUMN_SUM_TOL: f64 = 1e-12;

/// An undirected graph where every node is its own neighbor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    nodes: usize,
    adjacency: Vec<bool>,
}

impl Topology {
    /// Builds a topology from 0-indexed undirected edges. Self-loops are
    /// accepted and ignored since they are always implied.
    pub fn from_edges(nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if nodes == 0 {
            return Err(Error::InvalidTopology("a network needs at least one node".into()));
        }
        let mut adjacency = vec![false; nodes * nodes];
        for k in 0..nodes {
            adjacency[k * nodes + k] = true;
        }
        for &(l, k) in edges {
            if l >= nodes || k >= nodes {
                return Err(Error::InvalidTopology(format!(
                    "edge ({l}, {k}) references a node outside 0..{nodes}"
                )));
            }
            adjacency[l * nodes + k] = true;
            adjacency[k * nodes + l] = true;
        }
        Ok(Topology { nodes, adjacency })
    }

    pub fn fully_connected(nodes: usize) -> Result<Self> {
        let edges: Vec<_> = (0..nodes)
            .flat_map(|l| (l + 1..nodes).map(move |k| (l, k)))
            .collect();
        Topology::from_edges(nodes, &edges)
    }

    pub fn ring(nodes: usize) -> Result<Self> {
        let edges: Vec<_> = if nodes > 1 {
            (0..nodes).map(|k| (k, (k + 1) % nodes)).collect()
        } else {
            Vec::new()
        };
        Topology::from_edges(nodes, &edges)
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    pub fn is_adjacent(&self, l: usize, k: usize) -> bool {
        self.adjacency[l * self.nodes + k]
    }

    /// `N_k`, in increasing order and including `k` itself.
    pub fn neighborhood(&self, k: usize) -> Vec<usize> {
        (0..self.nodes).filter(|&l| self.is_adjacent(l, k)).collect()
    }

    /// `|N_k|`, counting the node itself.
    pub fn degree(&self, k: usize) -> usize {
        (0..self.nodes).filter(|&l| self.is_adjacent(l, k)).count()
    }

    /// Undirected edges `(l, k)` with `l < k`, 0-indexed.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for l in 0..self.nodes {
            for k in l + 1..self.nodes {
                if self.is_adjacent(l, k) {
                    out.push((l, k));
                }
            }
        }
        out
    }

    /// Number of connected components (breadth-first search).
    pub fn component_count(&self) -> usize {
        let mut seen = vec![false; self.nodes];
        let mut components = 0;
        for start in 0..self.nodes {
            if seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(k) = queue.pop_front() {
                for l in 0..self.nodes {
                    if !seen[l] && self.is_adjacent(l, k) {
                        seen[l] = true;
                        queue.push_back(l);
                    }
                }
            }
        }
        components
    }

    pub fn is_connected(&self) -> bool {
        self.component_count() == 1
    }

    /// Serializes to the plain-text edge-list format: a `N <count>` header
    /// followed by one 1-indexed `l k` line per undirected edge.
    pub fn to_edge_list(&self) -> String {
        self.to_string()
    }

    /// Parses the format written by [`Topology::to_edge_list`]. Blank lines
    /// and lines starting with `#` are skipped.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut nodes = None;
        let mut edges = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let err = |reason: &str| Error::EdgeListParse {
                line: line_no,
                reason: reason.to_string(),
            };
            match nodes {
                None => {
                    if fields.len() != 2 || fields[0] != "N" {
                        return Err(err("expected header `N <count>`"));
                    }
                    let n: usize = fields[1].parse().map_err(|_| err("bad node count"))?;
                    if n == 0 {
                        return Err(err("node count must be positive"));
                    }
                    nodes = Some(n);
                }
                Some(n) => {
                    if fields.len() != 2 {
                        return Err(err("expected `l k`"));
                    }
                    let l: usize = fields[0].parse().map_err(|_| err("bad node index"))?;
                    let k: usize = fields[1].parse().map_err(|_| err("bad node index"))?;
                    if l == 0 || k == 0 || l > n || k > n {
                        return Err(err("node index out of range (indices are 1-based)"));
                    }
                    edges.push((l - 1, k - 1));
                }
            }
        }
        let n = nodes.ok_or(Error::EdgeListParse {
            line: 0,
            reason: "missing `N <count>` header".into(),
        })?;
        Topology::from_edges(n, &edges)
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "N {}", self.nodes)?;
        for (l, k) in self.edges() {
            writeln!(f, "{} {}", l + 1, k + 1)?;
        }
        Ok(())
    }
}

impl FromStr for Topology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Topology::parse_edge_list(s)
    }
}

/// Places `n` nodes uniformly in the unit square and links every pair at
/// Euclidean distance `<= radius`. Deterministic in its arguments.
pub fn random_geometric_topology(n: usize, radius: f64, seed: u64) -> Result<Topology> {
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    if !(radius > 0.0 && radius <= std::f64::consts::SQRT_2) {
        return Err(Error::invalid("radius", format!("{radius} not in (0, sqrt 2]")));
    }
    let mut rng = seeded(seed, StreamRole::Topology);
    let points: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
        .collect();
    let mut edges = Vec::new();
    for l in 0..n {
        for k in l + 1..n {
            let (dx, dy) = (points[l].0 - points[k].0, points[l].1 - points[k].1);
            if dx.hypot(dy) <= radius {
                edges.push((l, k));
            }
        }
    }
    Topology::from_edges(n, &edges)
}

/// A nonnegative, column-stochastic `N x N` weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinationMatrix {
    entries: DMatrix<f64>,
}

impl CombinationMatrix {
    /// Wraps a raw matrix without checking it. Use [`validate_combiner`] to
    /// inspect an untrusted matrix.
    pub fn from_raw(entries: DMatrix<f64>) -> Self {
        CombinationMatrix { entries }
    }

    /// Wraps a raw matrix, failing if it violates any invariant against
    /// `topology`.
    pub fn try_new(entries: DMatrix<f64>, topology: &Topology) -> Result<Self> {
        let candidate = CombinationMatrix { entries };
        let report = validate_combiner(&candidate, topology)?;
        if report.is_valid() {
            Ok(candidate)
        } else {
            Err(Error::invalid("combiner", report.to_string()))
        }
    }

    pub fn identity(nodes: usize) -> Self {
        CombinationMatrix {
            entries: DMatrix::identity(nodes, nodes),
        }
    }

    pub fn node_count(&self) -> usize {
        self.entries.ncols()
    }

    /// `a[l, k]`: weight node `k` gives to node `l`.
    pub fn weight(&self, l: usize, k: usize) -> f64 {
        self.entries[(l, k)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Nonzero `(l, a[l, k])` pairs of column `k`.
    pub fn column_support(&self, k: usize) -> Vec<(usize, f64)> {
        self.entries
            .column(k)
            .iter()
            .enumerate()
            .filter(|(_, &a)| a != 0.0)
            .map(|(l, &a)| (l, a))
            .collect()
    }

    pub fn max_column_sum_error(&self) -> f64 {
        self.entries
            .column_iter()
            .map(|c| (c.sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Uniform rule `a[l, k] = 1 / |N_k|` for every `l` in `N_k`.
pub fn build_uniform_combiner(topology: &Topology) -> CombinationMatrix {
    let n = topology.node_count();
    let mut entries = DMatrix::zeros(n, n);
    for k in 0..n {
        let weight = 1.0 / topology.degree(k) as f64;
        for l in topology.neighborhood(k) {
            entries[(l, k)] = weight;
        }
    }
    CombinationMatrix { entries }
}

/// Metropolis rule: `a[l, k] = 1 / max(|N_l|, |N_k|)` for adjacent `l != k`,
/// with the self-weight taking up the rest of the column. The result is
/// symmetric and therefore doubly stochastic.
pub fn build_metropolis_combiner(topology: &Topology) -> CombinationMatrix {
    let n = topology.node_count();
    let mut entries = DMatrix::zeros(n, n);
    for k in 0..n {
        let mut off_diagonal = 0.0;
        for l in topology.neighborhood(k) {
            if l != k {
                let w = 1.0 / topology.degree(l).max(topology.degree(k)) as f64;
                entries[(l, k)] = w;
                off_diagonal += w;
            }
        }
        entries[(k, k)] = 1.0 - off_diagonal;
    }
    CombinationMatrix { entries }
}

/// One broken combiner invariant. Indices are 0-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    OutsideSupport { l: usize, k: usize, value: f64 },
    ColumnSum { k: usize, sum: f64 },
    Negative { l: usize, k: usize, value: f64 },
    AboveOne { l: usize, k: usize, value: f64 },
    NonFinite { l: usize, k: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::OutsideSupport { l, k, value } => {
                write!(f, "a[{l},{k}] = {value} but node {l} is not a neighbor of {k}")
            }
            Violation::ColumnSum { k, sum } => write!(f, "column {k} sums to {sum}"),
            Violation::Negative { l, k, value } => write!(f, "a[{l},{k}] = {value} is negative"),
            Violation::AboveOne { l, k, value } => write!(f, "a[{l},{k}] = {value} exceeds 1"),
            Violation::NonFinite { l, k } => write!(f, "a[{l},{k}] is not finite"),
        }
    }
}

/// Result of [`validate_combiner`]. Disconnected graphs only warn.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub disconnected_components: Option<usize>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            write!(f, "ok")?;
        } else {
            let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
            write!(f, "{}", parts.join("; "))?;
        }
        if let Some(c) = self.disconnected_components {
            write!(f, " (warning: graph has {c} connected components)")?;
        }
        Ok(())
    }
}

pub fn validate_combiner(matrix: &CombinationMatrix, topology: &Topology) -> Result<ValidationReport> {
    let n = topology.node_count();
    let m = matrix.as_matrix();
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch {
            what: "combiner vs topology node count",
            expected: n,
            got: m.nrows().max(m.ncols()),
        });
    }
    let mut violations = Vec::new();
    for k in 0..n {
        for l in 0..n {
            let value = m[(l, k)];
            if !value.is_finite() {
                violations.push(Violation::NonFinite { l, k });
                continue;
            }
            if value < 0.0 {
                violations.push(Violation::Negative { l, k, value });
            }
            if value > 1.0 {
                violations.push(Violation::AboveOne { l, k, value });
            }
            if value != 0.0 && !topology.is_adjacent(l, k) {
                violations.push(Violation::OutsideSupport { l, k, value });
            }
        }
        let sum = m.column(k).sum();
        if sum.is_finite() && (sum - 1.0).abs() > COLUMN_SUM_TOL {
            violations.push(Violation::ColumnSum { k, sum });
        }
    }
    let components = topology.component_count();
    Ok(ValidationReport {
        violations,
        disconnected_components: (components > 1).then_some(components),
    })
}
