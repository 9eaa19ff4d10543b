//! QUBO matrices, the MWIS penalty reduction and a brute-force oracle.
//!
//! A QUBO is stored as a sparse upper-triangular map `(i, j) -> value` with
//! `i <= j`, and its objective is `f(x) = sum_{i <= j} x_i Q(i,j) x_j`.
//!
//! # Text format
//!
//! ```text
//! qubo n <dim>
//! # kind logical|embedded     (optional comment, read back if present)
//! <i> <j> <value>              # one line per stored entry, i <= j, ascending
//! ```
//!
//! Values are written with Rust's shortest round-trip float formatting, so a
//! rendered matrix parses back bit-for-bit.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graphs::WeightedGraph;

/// Largest dimension [`brute_force_qubo`] accepts unless told otherwise.
pub const DEFAULT_BRUTE_FORCE_CAP: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuboError {
    #[error("penalty {penalty} must exceed the maximum vertex weight {max_weight}")]
    PenaltyTooSmall { penalty: f64, max_weight: f64 },
    #[error("assignment has length {got}, QUBO has dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("brute force over {dim} variables exceeds the cap of {cap}")]
    TooLarge { dim: usize, cap: usize },
    #[error("entry ({0}, {1}) is below the diagonal or out of range")]
    BadEntry(usize, usize),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuboKind {
    Logical,
    Embedded,
}

impl fmt::Display for QuboKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QuboKind::Logical => "logical",
            QuboKind::Embedded => "embedded",
        })
    }
}

/// Binary assignment `x`, one entry per QUBO variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Assignment(pub Vec<bool>);

impl Assignment {
    pub fn zeros(n: usize) -> Self {
        Assignment(vec![false; n])
    }

    /// Bit `i` of `mask` becomes `x_i`.
    pub fn from_mask(mask: u64, n: usize) -> Self {
        Assignment((0..n).map(|i| mask >> i & 1 == 1).collect())
    }

    /// Parses a string of `0`/`1` characters, `x_0` first.
    pub fn from_bits(bits: &str) -> Option<Self> {
        bits.chars()
            .map(|c| match c {
                '0' => Some(false),
                '1' => Some(true),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(Assignment)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    /// Indices set to 1, ascending.
    pub fn ones(&self) -> Vec<usize> {
        self.0.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
    }

    pub fn bits(&self) -> String {
        self.0.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

/// Upper-triangular sparse QUBO matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuboMatrix {
    dim: usize,
    kind: QuboKind,
    entries: BTreeMap<(usize, usize), f64>,
}

impl QuboMatrix {
    pub fn new(dim: usize, kind: QuboKind) -> Self {
        QuboMatrix { dim, kind, entries: BTreeMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> QuboKind {
        self.kind
    }

    /// Adds `value` to entry `(min(i,j), max(i,j))`.
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let (a, b) = (i.min(j), i.max(j));
        assert!(b < self.dim, "entry ({a}, {b}) outside dimension {}", self.dim);
        *self.entries.entry((a, b)).or_insert(0.0) += value;
    }

    /// Overwrites entry `(i, j)`; requires `i <= j < dim`.
    pub fn set(&mut self, i: usize, j: usize, value: f64) -> Result<(), QuboError> {
        if i > j || j >= self.dim {
            return Err(QuboError::BadEntry(i, j));
        }
        self.entries.insert((i, j), value);
        Ok(())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries.get(&(i.min(j), i.max(j))).copied().unwrap_or(0.0)
    }

    /// Stored entries in ascending `(i, j)` order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries.iter().map(|(&(i, j), &v)| (i, j, v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `x^T Q x` as the double sum over `i <= j`, in ascending entry order.
    pub fn evaluate(&self, x: &Assignment) -> Result<f64, QuboError> {
        if x.len() != self.dim {
            return Err(QuboError::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(self
            .entries
            .iter()
            .filter(|(&(i, j), _)| x.0[i] && x.0[j])
            .map(|(_, &v)| v)
            .sum())
    }

    /// Sum of absolute coefficient values.
    pub fn abs_sum(&self) -> f64 {
        self.entries.values().map(|v| v.abs()).sum()
    }

    /// Row-oriented view used by the samplers.
    pub fn adjacency(&self) -> QuboAdjacency {
        let mut diag = vec![0.0; self.dim];
        let mut neighbors = vec![Vec::new(); self.dim];
        for (&(i, j), &v) in &self.entries {
            if i == j {
                diag[i] += v;
            } else {
                neighbors[i].push((j, v));
                neighbors[j].push((i, v));
            }
        }
        QuboAdjacency { diag, neighbors }
    }

    pub fn render(&self) -> String {
        let mut out = format!("qubo n {}\n# kind {}\n", self.dim, self.kind);
        for (&(i, j), v) in &self.entries {
            out.push_str(&format!("{i} {j} {v}\n"));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, QuboError> {
        let err = |line: usize, message: String| QuboError::Parse { line, message };
        let mut q: Option<QuboMatrix> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let trimmed = raw.trim();
            if let Some(comment) = trimmed.strip_prefix('#') {
                if let (Some(q), Some(kind)) = (q.as_mut(), comment.trim().strip_prefix("kind ")) {
                    q.kind = match kind.trim() {
                        "logical" => QuboKind::Logical,
                        "embedded" => QuboKind::Embedded,
                        other => return Err(err(line_no, format!("unknown kind `{other}`"))),
                    };
                }
                continue;
            }
            if trimmed.is_empty() {
                continue;
            }
            let tokens: Vec<&str> = trimmed.split_whitespace().collect();
            match q.as_mut() {
                None => {
                    let dim = match tokens.as_slice() {
                        ["qubo", "n", d] => d
                            .parse()
                            .map_err(|e| err(line_no, format!("bad dimension: {e}")))?,
                        _ => return Err(err(line_no, "expected header `qubo n <dim>`".into())),
                    };
                    q = Some(QuboMatrix::new(dim, QuboKind::Logical));
                }
                Some(q) => {
                    let [i, j, v] = tokens.as_slice() else {
                        return Err(err(line_no, "expected `<i> <j> <value>`".into()));
                    };
                    let i: usize = i.parse().map_err(|e| err(line_no, format!("bad row: {e}")))?;
                    let j: usize = j.parse().map_err(|e| err(line_no, format!("bad column: {e}")))?;
                    let v: f64 = v.parse().map_err(|e| err(line_no, format!("bad value: {e}")))?;
                    if q.entries.contains_key(&(i, j)) {
                        return Err(err(line_no, format!("duplicate entry ({i}, {j})")));
                    }
                    q.set(i, j, v).map_err(|e| err(line_no, e.to_string()))?;
                }
            }
        }
        q.ok_or_else(|| err(1, "missing header".into()))
    }
}

/// Diagonal plus symmetric neighbour lists of a QUBO.
#[derive(Debug, Clone)]
pub struct QuboAdjacency {
    pub diag: Vec<f64>,
    pub neighbors: Vec<Vec<(usize, f64)>>,
}

/// The MWIS reduction: `Q(i,i) = -w(v_i)`, `Q(i,j) = S` for each edge `i < j`.
///
/// The penalty defaults to `W + 1`, where `W` is the largest vertex weight.
pub fn mwis_to_qubo(graph: &WeightedGraph, penalty: Option<f64>) -> Result<QuboMatrix, QuboError> {
    let max_weight = graph.max_weight();
    let penalty = penalty.unwrap_or(max_weight + 1.0);
    if penalty.is_nan() || penalty <= max_weight {
        return Err(QuboError::PenaltyTooSmall { penalty, max_weight });
    }
    let mut q = QuboMatrix::new(graph.n(), QuboKind::Logical);
    for (v, &w) in graph.weights().iter().enumerate() {
        q.entries.insert((v, v), -w);
    }
    for &(u, v) in graph.edges() {
        q.entries.insert((u, v), penalty);
    }
    Ok(q)
}

/// Vertex set read off an assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedSet {
    pub vertices: Vec<usize>,
    pub weight: f64,
    pub valid: bool,
}

/// `{v_i | x_i = 1}`, its weight and whether it is independent.
pub fn decode_independent_set(graph: &WeightedGraph, x: &Assignment) -> Result<DecodedSet, QuboError> {
    if x.len() != graph.n() {
        return Err(QuboError::DimensionMismatch { expected: graph.n(), got: x.len() });
    }
    let vertices = x.ones();
    Ok(DecodedSet {
        weight: graph.set_weight(&vertices),
        valid: graph.is_independent(&vertices),
        vertices,
    })
}

fn evaluate_mask(entries: &[(usize, usize, f64)], mask: u64) -> f64 {
    entries
        .iter()
        .filter(|&&(i, j, _)| mask >> i & 1 == 1 && mask >> j & 1 == 1)
        .map(|&(_, _, v)| v)
        .sum()
}

/// Exhaustive minimiser over all `2^n` assignments.
///
/// Walks the assignments in Gray-code order with incremental energies and
/// re-scores every near-best candidate with the exact ascending-order sum used
/// by [`QuboMatrix::evaluate`]. Among exactly equal minima the assignment with
/// the lowest binary value wins, reading `x_0` as the least significant bit.
pub fn brute_force_qubo(q: &QuboMatrix, cap: usize) -> Result<(Assignment, f64), QuboError> {
    let n = q.dim();
    if n > cap || n > 63 {
        return Err(QuboError::TooLarge { dim: n, cap });
    }
    let entries: Vec<(usize, usize, f64)> = q.entries().collect();
    let adj = q.adjacency();
    let tol = 1e-7 * (1.0 + q.abs_sum());

    let mut x = vec![false; n];
    let mut mask: u64 = 0;
    let mut energy = 0.0_f64;
    let mut running_best = 0.0_f64;
    let mut best = (0.0_f64, 0u64);

    for step in 1u64..(1u64 << n) {
        let i = step.trailing_zeros() as usize;
        let field = adj.diag[i]
            + adj.neighbors[i].iter().filter(|&&(j, _)| x[j]).map(|&(_, v)| v).sum::<f64>();
        if x[i] {
            energy -= field;
        } else {
            energy += field;
        }
        x[i] = !x[i];
        mask ^= 1 << i;
        if step & 0xffff == 0 {
            energy = evaluate_mask(&entries, mask);
        }
        if energy <= running_best + tol {
            running_best = running_best.min(energy);
            let exact = evaluate_mask(&entries, mask);
            if exact < best.0 || (exact == best.0 && mask < best.1) {
                best = (exact, mask);
            }
        }
    }
    Ok((Assignment::from_mask(best.1, n), best.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::GraphFamily;
    use proptest::prelude::*;

    fn edge_graph() -> WeightedGraph {
        WeightedGraph::new(2, [(0, 1)], vec![0.3, 0.7]).unwrap()
    }

    /// Plain enumeration in ascending mask order; independent of the Gray walk.
    fn naive_min(q: &QuboMatrix) -> (Assignment, f64) {
        let n = q.dim();
        let mut best = (Assignment::zeros(n), 0.0);
        for mask in 0..(1u64 << n) {
            let x = Assignment::from_mask(mask, n);
            let v = q.evaluate(&x).unwrap();
            if v < best.1 {
                best = (x, v);
            }
        }
        best
    }

    #[test]
    fn edge_graph_reduction() {
        let q = mwis_to_qubo(&edge_graph(), Some(1.7)).unwrap();
        assert_eq!(q.get(0, 0), -0.3);
        assert_eq!(q.get(1, 1), -0.7);
        assert_eq!(q.get(0, 1), 1.7);
        assert_eq!(q.get(1, 0), 1.7);
        assert_eq!(q.kind(), QuboKind::Logical);
        // Oracle: all four assignments enumerated by hand.
        let values: Vec<f64> = ["00", "10", "01", "11"]
            .iter()
            .map(|b| q.evaluate(&Assignment::from_bits(b).unwrap()).unwrap())
            .collect();
        assert_eq!(values[0], 0.0);
        assert_eq!(values[1], -0.3);
        assert_eq!(values[2], -0.7);
        assert!((values[3] - 0.7).abs() < 1e-12);
        let (x, v) = brute_force_qubo(&q, DEFAULT_BRUTE_FORCE_CAP).unwrap();
        assert_eq!(x.bits(), "01");
        assert_eq!(v, -0.7);
    }

    #[test]
    fn penalty_must_exceed_max_weight() {
        let g = edge_graph();
        assert!(matches!(mwis_to_qubo(&g, Some(0.7)), Err(QuboError::PenaltyTooSmall { .. })));
        assert!(mwis_to_qubo(&g, Some(0.5)).is_err());
        let q = mwis_to_qubo(&g, None).unwrap();
        assert_eq!(q.get(0, 1), 1.7);
    }

    #[test]
    fn triangle_and_edgeless() {
        let k3 = GraphFamily::Complete(3).generate().unwrap();
        let q = mwis_to_qubo(&k3, Some(2.0)).unwrap();
        let (x, v) = brute_force_qubo(&q, 24).unwrap();
        assert_eq!(v, -1.0);
        assert_eq!(x.ones().len(), 1);
        // lowest binary value among the three singletons is x_0 = 1
        assert_eq!(x.bits(), "100");

        let empty = WeightedGraph::new(3, [], vec![0.2, 0.5, 0.1]).unwrap();
        let q = mwis_to_qubo(&empty, None).unwrap();
        let (x, v) = brute_force_qubo(&q, 24).unwrap();
        assert_eq!(x.bits(), "111");
        assert_eq!(v, -(0.2 + 0.5 + 0.1));
    }

    #[test]
    fn evaluate_examples() {
        let q = mwis_to_qubo(&edge_graph(), Some(1.7)).unwrap();
        assert_eq!(q.evaluate(&Assignment::zeros(2)).unwrap(), 0.0);
        assert_eq!(q.evaluate(&Assignment::from_bits("10").unwrap()).unwrap(), -0.3);
        assert!(matches!(
            q.evaluate(&Assignment::zeros(3)),
            Err(QuboError::DimensionMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn decode_examples() {
        let g = edge_graph();
        let d = decode_independent_set(&g, &Assignment::from_bits("01").unwrap()).unwrap();
        assert_eq!(d, DecodedSet { vertices: vec![1], weight: 0.7, valid: true });
        let d = decode_independent_set(&g, &Assignment::from_bits("11").unwrap()).unwrap();
        assert_eq!((d.vertices, d.weight, d.valid), (vec![0, 1], 1.0, false));
        let d = decode_independent_set(&g, &Assignment::zeros(2)).unwrap();
        assert_eq!((d.vertices.len(), d.weight, d.valid), (0, 0.0, true));
    }

    #[test]
    fn brute_force_examples() {
        let single = WeightedGraph::new(1, [], vec![0.5]).unwrap();
        let (x, v) = brute_force_qubo(&mwis_to_qubo(&single, None).unwrap(), 24).unwrap();
        assert_eq!((x.bits().as_str(), v), ("1", -0.5));

        let big = QuboMatrix::new(25, QuboKind::Logical);
        assert_eq!(brute_force_qubo(&big, 24).unwrap_err(), QuboError::TooLarge { dim: 25, cap: 24 });

        let zero = QuboMatrix::new(5, QuboKind::Logical);
        let (x, v) = brute_force_qubo(&zero, 24).unwrap();
        assert_eq!((x.bits().as_str(), v), ("00000", 0.0));
    }

    #[test]
    fn text_round_trip() {
        let g = GraphFamily::Cycle(5).generate().unwrap().with_weights(&[0.1, 0.2, 0.3, 0.45, 0.99]).unwrap();
        let q = mwis_to_qubo(&g, None).unwrap();
        let text = q.render();
        assert!(text.starts_with("qubo n 5\n"));
        assert_eq!(QuboMatrix::parse(&text).unwrap(), q);
        assert!(QuboMatrix::parse("qubo n 2\n1 0 1.0").is_err());
        assert!(QuboMatrix::parse("qubo n 2\n0 2 1.0").is_err());
        assert!(QuboMatrix::parse("0 0 1").is_err());
    }

    fn arb_graph(max_n: usize) -> impl Strategy<Value = WeightedGraph> {
        (1..=max_n).prop_flat_map(|n| {
            let pairs: Vec<(usize, usize)> =
                (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
            let m = pairs.len();
            (
                Just(n),
                proptest::collection::vec(any::<bool>(), m),
                proptest::collection::vec(1u32..=100, n),
                Just(pairs),
            )
                .prop_map(|(n, keep, cents, pairs)| {
                    let edges = pairs.into_iter().zip(keep).filter(|(_, k)| *k).map(|(e, _)| e);
                    let weights = cents.into_iter().map(|c| c as f64 / 100.0).collect();
                    WeightedGraph::new(n, edges, weights).unwrap()
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn gray_walk_matches_naive_enumeration(g in arb_graph(9), extra in 0.01f64..3.0) {
            let q = mwis_to_qubo(&g, Some(g.max_weight() + extra)).unwrap();
            let (x, v) = brute_force_qubo(&q, 24).unwrap();
            let (nx, nv) = naive_min(&q);
            prop_assert_eq!(v, nv);
            prop_assert_eq!(x, nx);
        }

        #[test]
        fn violated_edges_are_never_worth_keeping(g in arb_graph(8), mask in any::<u64>()) {
            let q = mwis_to_qubo(&g, None).unwrap();
            let x = Assignment::from_mask(mask, g.n());
            let e0 = q.evaluate(&x).unwrap();
            for &(u, v) in g.edges() {
                if x.get(u) && x.get(v) {
                    for drop in [u, v] {
                        let mut y = x.clone();
                        y.0[drop] = false;
                        prop_assert!(q.evaluate(&y).unwrap() < e0);
                    }
                }
            }
        }

        #[test]
        fn evaluate_is_linear_in_q(g in arb_graph(7), mask in any::<u64>(), a in -3.0f64..3.0) {
            let q1 = mwis_to_qubo(&g, None).unwrap();
            let mut q2 = QuboMatrix::new(g.n(), QuboKind::Logical);
            for (i, j, v) in q1.entries() {
                q2.add(i, j, (i + 2 * j) as f64 * 0.1 - v);
            }
            let mut combo = QuboMatrix::new(g.n(), QuboKind::Logical);
            for (i, j, v) in q1.entries() {
                combo.add(i, j, v);
            }
            for (i, j, v) in q2.entries() {
                combo.add(i, j, a * v);
            }
            // combo was built as q1 + a*q2 entrywise
            let mut scaled = QuboMatrix::new(g.n(), QuboKind::Logical);
            for (i, j, v) in q1.entries() {
                scaled.add(i, j, v + a * q2.get(i, j));
            }
            let x = Assignment::from_mask(mask, g.n());
            let lhs = scaled.evaluate(&x).unwrap();
            let rhs = q1.evaluate(&x).unwrap() + a * q2.evaluate(&x).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs()));
            prop_assert!((combo.evaluate(&x).unwrap() - rhs).abs() < 1e-9 * (1.0 + rhs.abs()));
        }
    }
}
