//! Chimera hardware graphs.
//!
//! `χ_k` is a `k × k` grid of unit cells. Each cell holds eight qubits, four on
//! the left side and four on the right, wired as a complete bipartite `K_{4,4}`.
//! Left-side qubit `i` couples to left-side qubit `i` of the horizontally
//! adjacent cells; right-side qubit `i` couples to right-side qubit `i` of the
//! vertically adjacent cells.
//!
//! Qubit numbering: `((row * k + col) * 2 + side) * 4 + index` with side 0 = left.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::graphs::hex_string;
use crate::seed;

/// Grid size of the D-Wave 2X class device.
pub const DEFAULT_GRID: usize = 12;
/// Active qubit count of the 2X used as a reference target.
pub const DEFAULT_ACTIVE: usize = 1098;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HardwareError {
    #[error("Chimera grid size must be at least 1")]
    ZeroSize,
    #[error("inactive qubit {qubit} out of range 0..{total}")]
    InactiveOutOfRange { qubit: usize, total: usize },
    #[error("cannot deactivate {requested} of {total} qubits")]
    TooManyInactive { requested: usize, total: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QubitCoord {
    pub row: usize,
    pub col: usize,
    pub side: Side,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChimeraGraph {
    k: usize,
    active: Vec<bool>,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl ChimeraGraph {
    /// Builds `χ_k` with the listed qubits removed. Duplicates are harmless.
    pub fn build(k: usize, inactive: &[usize]) -> Result<Self, HardwareError> {
        if k == 0 {
            return Err(HardwareError::ZeroSize);
        }
        let total = 8 * k * k;
        let mut active = vec![true; total];
        for &q in inactive {
            if q >= total {
                return Err(HardwareError::InactiveOutOfRange { qubit: q, total });
            }
            active[q] = false;
        }
        let q = |row: usize, col: usize, side: usize, index: usize| ((row * k + col) * 2 + side) * 4 + index;
        let mut edges = Vec::with_capacity(16 * k * k + 8 * k * (k - 1));
        for row in 0..k {
            for col in 0..k {
                for i in 0..4 {
                    for j in 0..4 {
                        edges.push((q(row, col, 0, i), q(row, col, 1, j)));
                    }
                    if col + 1 < k {
                        edges.push((q(row, col, 0, i), q(row, col + 1, 0, i)));
                    }
                    if row + 1 < k {
                        edges.push((q(row, col, 1, i), q(row + 1, col, 1, i)));
                    }
                }
            }
        }
        edges.retain(|&(a, b)| active[a] && active[b]);
        edges.sort_unstable();
        let mut adjacency = vec![Vec::new(); total];
        for &(a, b) in &edges {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(ChimeraGraph { k, active, edges, adjacency })
    }

    /// `χ_k` with `count` distinct qubits deactivated at random.
    pub fn with_random_inactive(k: usize, count: usize, mask_seed: u64) -> Result<Self, HardwareError> {
        let total = 8 * k * k;
        if count > total {
            return Err(HardwareError::TooManyInactive { requested: count, total });
        }
        let mut rng = seed::rng(mask_seed);
        let mut inactive = sample(&mut rng, total, count).into_vec();
        inactive.sort_unstable();
        Self::build(k, &inactive)
    }

    /// `χ_12` with 54 randomly inactive qubits, leaving 1098 active.
    pub fn dwave_2x_like(mask_seed: u64) -> Self {
        Self::with_random_inactive(DEFAULT_GRID, 8 * DEFAULT_GRID * DEFAULT_GRID - DEFAULT_ACTIVE, mask_seed)
            .expect("constant parameters are valid")
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Size of the qubit index space, active or not.
    pub fn num_qubits(&self) -> usize {
        self.active.len()
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn is_active(&self, q: usize) -> bool {
        self.active.get(q).copied().unwrap_or(false)
    }

    pub fn inactive(&self) -> Vec<usize> {
        (0..self.active.len()).filter(|&q| !self.active[q]).collect()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, q: usize) -> &[usize] {
        &self.adjacency[q]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a < self.adjacency.len() && self.adjacency[a].binary_search(&b).is_ok()
    }

    pub fn index(&self, c: QubitCoord) -> usize {
        let side = match c.side {
            Side::Left => 0,
            Side::Right => 1,
        };
        ((c.row * self.k + c.col) * 2 + side) * 4 + c.index
    }

    pub fn coord(&self, q: usize) -> QubitCoord {
        let index = q % 4;
        let side = if (q / 4).is_multiple_of(2) { Side::Left } else { Side::Right };
        let cell = q / 8;
        QubitCoord { row: cell / self.k, col: cell % self.k, side, index }
    }

    /// Degree → number of active qubits with that degree.
    pub fn degree_histogram(&self) -> BTreeMap<usize, usize> {
        let mut hist = BTreeMap::new();
        for q in (0..self.active.len()).filter(|&q| self.active[q]) {
            *hist.entry(self.adjacency[q].len()).or_insert(0) += 1;
        }
        hist
    }

    pub fn structure_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.k as u64).to_le_bytes());
        for q in self.inactive() {
            h.update((q as u64).to_le_bytes());
        }
        hex_string(&h.finalize())
    }

    /// Adjacency-list export in the graph file format, with a `chimera k=` header.
    /// Inactive qubits appear as isolated vertices and are listed in a comment.
    pub fn render(&self) -> String {
        let mut out = format!("# chimera k={}\n", self.k);
        let inactive = self.inactive();
        if !inactive.is_empty() {
            let list: Vec<String> = inactive.iter().map(|q| q.to_string()).collect();
            out.push_str(&format!("# inactive {}\n", list.join(" ")));
        }
        out.push_str(&format!("n {}\n", self.num_qubits()));
        for q in 0..self.num_qubits() {
            out.push_str(&format!("{q}:"));
            for n in &self.adjacency[q] {
                out.push_str(&format!(" {n}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Operation-style constructor.
pub fn build_chimera(k: usize, inactive: &[usize]) -> Result<ChimeraGraph, HardwareError> {
    ChimeraGraph::build(k, inactive)
}
