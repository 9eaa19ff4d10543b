//! Weighted graphs, graph-family generators and DWMWIS instances.
//!
//! # Graph file format
//!
//! Line oriented, UTF-8. Blank lines are ignored and `#` starts a comment that
//! runs to the end of the line.
//!
//! ```text
//! n <vertex_count>              # exactly once, before any other record
//! w <index> <decimal>           # optional; vertices without one weigh 1
//! <u>: <v1> <v2> ...            # adjacency; may be empty, may repeat edges
//! ```
//!
//! Edges are undirected and deduplicated, so listing `{u,v}` under both
//! endpoints is fine. Self-loops, indices `>= n`, duplicate `w` records and
//! weights that are not finite and strictly positive are errors reported with
//! their 1-based line number. [`WeightedGraph::render`] writes every weight with
//! Rust's shortest round-trip float formatting, so `parse(render(g)) == g`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("graph must have at least one vertex")]
    Empty,
    #[error("edge ({0}, {1}) references a vertex outside 0..{2}")]
    DanglingEdge(usize, usize, usize),
    #[error("self-loop on vertex {0}")]
    SelfLoop(usize),
    #[error("expected {expected} weights, got {got}")]
    WeightCount { expected: usize, got: usize },
    #[error("weight of vertex {vertex} must be finite and > 0, got {weight}")]
    NonPositiveWeight { vertex: usize, weight: f64 },
    #[error("invalid graph family: {0}")]
    InvalidFamily(String),
    #[error("number of weight assignments must be at least 1")]
    NoWeightSets,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Undirected graph with strictly positive vertex weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGraph", into = "RawGraph")]
pub struct WeightedGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    weights: Vec<f64>,
    adjacency: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct RawGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    weights: Vec<f64>,
}

impl TryFrom<RawGraph> for WeightedGraph {
    type Error = GraphError;
    fn try_from(raw: RawGraph) -> Result<Self, GraphError> {
        WeightedGraph::new(raw.n, raw.edges, raw.weights)
    }
}

impl From<WeightedGraph> for RawGraph {
    fn from(g: WeightedGraph) -> Self {
        RawGraph { n: g.n, edges: g.edges, weights: g.weights }
    }
}

impl WeightedGraph {
    /// Builds a graph, canonicalising edges to `(min, max)` in sorted order.
    pub fn new(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        weights: Vec<f64>,
    ) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        if weights.len() != n {
            return Err(GraphError::WeightCount { expected: n, got: weights.len() });
        }
        check_weights(&weights)?;
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(GraphError::DanglingEdge(u, v, n));
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            set.insert((u.min(v), u.max(v)));
        }
        let edges: Vec<_> = set.into_iter().collect();
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in &edges {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(WeightedGraph { n, edges, weights, adjacency })
    }

    /// Graph with every weight equal to 1.
    pub fn unit(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, GraphError> {
        Self::new(n, edges, vec![1.0; n])
    }

    /// Same structure, new weights.
    pub fn with_weights(&self, weights: &[f64]) -> Result<Self, GraphError> {
        if weights.len() != self.n {
            return Err(GraphError::WeightCount { expected: self.n, got: weights.len() });
        }
        check_weights(weights)?;
        Ok(WeightedGraph { weights: weights.to_vec(), ..self.clone() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Canonical edge list: `u < v`, sorted lexicographically.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, v: usize) -> f64 {
        self.weights[v]
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n && self.adjacency[u].binary_search(&v).is_ok()
    }

    /// W, the largest vertex weight.
    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(f64::MIN, f64::max)
    }

    /// True when no two listed vertices are adjacent.
    pub fn is_independent(&self, vertices: &[usize]) -> bool {
        let mut chosen = vec![false; self.n];
        for &v in vertices {
            chosen[v] = true;
        }
        self.edges.iter().all(|&(u, v)| !(chosen[u] && chosen[v]))
    }

    /// Sum of weights over `vertices`, accumulated in ascending vertex order.
    pub fn set_weight(&self, vertices: &[usize]) -> f64 {
        let mut sorted = vertices.to_vec();
        sorted.sort_unstable();
        sorted.iter().map(|&v| self.weights[v]).sum()
    }

    /// Hash of the structure only (vertex count and edges), hex encoded.
    pub fn structure_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n as u64).to_le_bytes());
        for &(u, v) in &self.edges {
            h.update((u as u64).to_le_bytes());
            h.update((v as u64).to_le_bytes());
        }
        hex_string(&h.finalize())
    }

    /// Serialises into the graph file format.
    pub fn render(&self) -> String {
        let mut out = format!("n {}\n", self.n);
        for (v, w) in self.weights.iter().enumerate() {
            out.push_str(&format!("w {v} {w}\n"));
        }
        for v in 0..self.n {
            out.push_str(&format!("{v}:"));
            for u in &self.adjacency[v] {
                out.push_str(&format!(" {u}"));
            }
            out.push('\n');
        }
        out
    }

    /// Parses the graph file format.
    pub fn parse(text: &str) -> Result<Self, GraphError> {
        parse_graph(text)
    }
}

pub(crate) fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn check_weights(weights: &[f64]) -> Result<(), GraphError> {
    for (vertex, &weight) in weights.iter().enumerate() {
        if !(weight.is_finite() && weight > 0.0) {
            return Err(GraphError::NonPositiveWeight { vertex, weight });
        }
    }
    Ok(())
}

/// Parses the line-oriented adjacency-list format described in the module docs.
pub fn parse_graph(text: &str) -> Result<WeightedGraph, GraphError> {
    let err = |line: usize, message: String| GraphError::Parse { line, message };
    let mut n: Option<usize> = None;
    let mut weights: Vec<Option<f64>> = Vec::new();
    let mut edges = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let head = tokens.next().unwrap_or_default();
        match head {
            "n" => {
                if n.is_some() {
                    return Err(err(line_no, "duplicate `n` header".into()));
                }
                let count: usize = tokens
                    .next()
                    .ok_or_else(|| err(line_no, "missing vertex count".into()))?
                    .parse()
                    .map_err(|e| err(line_no, format!("bad vertex count: {e}")))?;
                if count == 0 {
                    return Err(err(line_no, "vertex count must be at least 1".into()));
                }
                if tokens.next().is_some() {
                    return Err(err(line_no, "trailing tokens after vertex count".into()));
                }
                n = Some(count);
                weights = vec![None; count];
            }
            "w" => {
                let count = n.ok_or_else(|| err(line_no, "`w` record before `n` header".into()))?;
                let v: usize = tokens
                    .next()
                    .ok_or_else(|| err(line_no, "missing vertex index".into()))?
                    .parse()
                    .map_err(|e| err(line_no, format!("bad vertex index: {e}")))?;
                let w: f64 = tokens
                    .next()
                    .ok_or_else(|| err(line_no, "missing weight".into()))?
                    .parse()
                    .map_err(|e| err(line_no, format!("bad weight: {e}")))?;
                if tokens.next().is_some() {
                    return Err(err(line_no, "trailing tokens after weight".into()));
                }
                if v >= count {
                    return Err(err(line_no, format!("vertex {v} out of range 0..{count}")));
                }
                if !(w.is_finite() && w > 0.0) {
                    return Err(err(line_no, format!("weight of vertex {v} must be > 0, got {w}")));
                }
                if weights[v].replace(w).is_some() {
                    return Err(err(line_no, format!("duplicate weight for vertex {v}")));
                }
            }
            _ => {
                let count = n.ok_or_else(|| err(line_no, "adjacency line before `n` header".into()))?;
                let (lhs, rhs) = line
                    .split_once(':')
                    .ok_or_else(|| err(line_no, format!("unrecognised record `{line}`")))?;
                let u: usize = lhs
                    .trim()
                    .parse()
                    .map_err(|e| err(line_no, format!("bad vertex index `{}`: {e}", lhs.trim())))?;
                if u >= count {
                    return Err(err(line_no, format!("vertex {u} out of range 0..{count}")));
                }
                for tok in rhs.split_whitespace() {
                    let v: usize = tok
                        .parse()
                        .map_err(|e| err(line_no, format!("bad neighbour `{tok}`: {e}")))?;
                    if v >= count {
                        return Err(err(line_no, format!("neighbour {v} out of range 0..{count}")));
                    }
                    if v == u {
                        return Err(err(line_no, format!("self-loop on vertex {u}")));
                    }
                    edges.push((u, v));
                }
            }
        }
    }
    let n = n.ok_or_else(|| err(text.lines().count().max(1), "missing `n` header".into()))?;
    let weights = weights.into_iter().map(|w| w.unwrap_or(1.0)).collect();
    WeightedGraph::new(n, edges, weights)
}

/// Standard graph families used by the benchmark corpus.
///
/// Names: `C6` cycle, `S4` star with 4 leaves, `K5` complete, `P3` path,
/// `G3x4` grid with 3 rows and 4 columns, `B2x3` complete bipartite K_{2,3}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GraphFamily {
    Cycle(usize),
    /// One centre plus `leaves` leaves.
    Star(usize),
    Complete(usize),
    Path(usize),
    Grid { rows: usize, cols: usize },
    Bipartite { left: usize, right: usize },
}

impl GraphFamily {
    /// Family tag used in report columns.
    pub fn kind(&self) -> &'static str {
        match self {
            GraphFamily::Cycle(_) => "cycle",
            GraphFamily::Star(_) => "star",
            GraphFamily::Complete(_) => "complete",
            GraphFamily::Path(_) => "path",
            GraphFamily::Grid { .. } => "grid",
            GraphFamily::Bipartite { .. } => "bipartite",
        }
    }

    pub fn vertex_count(&self) -> usize {
        match *self {
            GraphFamily::Cycle(n) | GraphFamily::Complete(n) | GraphFamily::Path(n) => n,
            GraphFamily::Star(leaves) => leaves + 1,
            GraphFamily::Grid { rows, cols } => rows * cols,
            GraphFamily::Bipartite { left, right } => left + right,
        }
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        let bad = |why: &str| Err(GraphError::InvalidFamily(format!("{self}: {why}")));
        match *self {
            GraphFamily::Cycle(n) if n < 3 => bad("a cycle needs at least 3 vertices"),
            GraphFamily::Star(0) => bad("a star needs at least 1 leaf"),
            GraphFamily::Complete(0) | GraphFamily::Path(0) => bad("need at least 1 vertex"),
            GraphFamily::Grid { rows, cols } if rows == 0 || cols == 0 => {
                bad("grid dimensions must be at least 1")
            }
            GraphFamily::Bipartite { left, right } if left == 0 || right == 0 => {
                bad("both sides must be nonempty")
            }
            _ => Ok(()),
        }
    }

    /// Canonical member of the family with unit weights.
    pub fn generate(&self) -> Result<WeightedGraph, GraphError> {
        self.validate()?;
        let n = self.vertex_count();
        let edges: Vec<(usize, usize)> = match *self {
            GraphFamily::Cycle(n) => (0..n).map(|i| (i, (i + 1) % n)).collect(),
            GraphFamily::Star(leaves) => (1..=leaves).map(|i| (0, i)).collect(),
            GraphFamily::Complete(n) => {
                (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
            }
            GraphFamily::Path(n) => (1..n).map(|i| (i - 1, i)).collect(),
            GraphFamily::Grid { rows, cols } => {
                let id = |r: usize, c: usize| r * cols + c;
                let mut e = Vec::new();
                for r in 0..rows {
                    for c in 0..cols {
                        if c + 1 < cols {
                            e.push((id(r, c), id(r, c + 1)));
                        }
                        if r + 1 < rows {
                            e.push((id(r, c), id(r + 1, c)));
                        }
                    }
                }
                e
            }
            GraphFamily::Bipartite { left, right } => {
                (0..left).flat_map(|i| (0..right).map(move |j| (i, left + j))).collect()
            }
        };
        WeightedGraph::unit(n, edges)
    }
}

/// Convenience wrapper matching the operation name used throughout the docs.
pub fn generate_family(family: GraphFamily) -> Result<WeightedGraph, GraphError> {
    family.generate()
}

impl fmt::Display for GraphFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphFamily::Cycle(n) => write!(f, "C{n}"),
            GraphFamily::Star(n) => write!(f, "S{n}"),
            GraphFamily::Complete(n) => write!(f, "K{n}"),
            GraphFamily::Path(n) => write!(f, "P{n}"),
            GraphFamily::Grid { rows, cols } => write!(f, "G{rows}x{cols}"),
            GraphFamily::Bipartite { left, right } => write!(f, "B{left}x{right}"),
        }
    }
}

impl FromStr for GraphFamily {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, GraphError> {
        let bad = || GraphError::InvalidFamily(format!("cannot parse family name `{s}`"));
        let s = s.trim();
        let mut chars = s.chars();
        let prefix = chars.next().ok_or_else(bad)?;
        let rest = chars.as_str();
        let one = || rest.parse::<usize>().map_err(|_| bad());
        let two = || -> Result<(usize, usize), GraphError> {
            let (a, b) = rest.split_once('x').ok_or_else(bad)?;
            Ok((a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?))
        };
        let family = match prefix {
            'C' => GraphFamily::Cycle(one()?),
            'S' => GraphFamily::Star(one()?),
            'K' => GraphFamily::Complete(one()?),
            'P' => GraphFamily::Path(one()?),
            'G' => {
                let (rows, cols) = two()?;
                GraphFamily::Grid { rows, cols }
            }
            'B' => {
                let (left, right) = two()?;
                GraphFamily::Bipartite { left, right }
            }
            _ => return Err(bad()),
        };
        family.validate()?;
        Ok(family)
    }
}

impl Serialize for GraphFamily {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GraphFamily {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One graph structure with `m` weight functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DwmwisInstance {
    pub id: String,
    pub family: Option<GraphFamily>,
    pub graph: WeightedGraph,
    pub weight_sets: Vec<Vec<f64>>,
    pub seed: u64,
}

impl DwmwisInstance {
    pub fn m(&self) -> usize {
        self.weight_sets.len()
    }

    /// The graph carrying weight function `i`.
    pub fn weighted(&self, i: usize) -> WeightedGraph {
        self.graph
            .with_weights(&self.weight_sets[i])
            .expect("weight sets are validated at construction")
    }

    /// Largest weight over all weight functions.
    pub fn max_weight(&self) -> f64 {
        self.weight_sets
            .iter()
            .flatten()
            .copied()
            .fold(f64::MIN, f64::max)
    }
}

/// Draws one weight: uniform on [0, 1), rounded to 2 decimals, 0.00 mapped to 0.01.
fn draw_weight(rng: &mut seed::Rng) -> f64 {
    let u: f64 = rng.random();
    let cents = (u * 100.0).round().max(1.0);
    cents / 100.0
}

/// Generates `m` reproducible weight vectors for `graph`.
pub fn make_dwmwis_instance(
    graph: &WeightedGraph,
    m: usize,
    seed: u64,
) -> Result<DwmwisInstance, GraphError> {
    if m == 0 {
        return Err(GraphError::NoWeightSets);
    }
    let mut rng = seed::rng(seed);
    let weight_sets = (0..m)
        .map(|_| (0..graph.n()).map(|_| draw_weight(&mut rng)).collect())
        .collect();
    let structure = graph.with_weights(&vec![1.0; graph.n()])?;
    Ok(DwmwisInstance {
        id: format!("g{}", &graph.structure_hash()[..12]),
        family: None,
        graph: structure,
        weight_sets,
        seed,
    })
}

/// Instance for a named family member.
pub fn family_instance(family: GraphFamily, m: usize, seed: u64) -> Result<DwmwisInstance, GraphError> {
    let graph = family.generate()?;
    let mut inst = make_dwmwis_instance(&graph, m, seed)?;
    inst.id = family.to_string();
    inst.family = Some(family);
    Ok(inst)
}
