//! Exact classical baseline: the MWIS binary integer program
//!
//! ```text
//! maximise   sum_i w_i x_i
//! subject to x_i + x_j <= 1   for every edge {i, j}
//! ```
//!
//! solved by branch and bound. The constraint list is built once per graph and
//! shared by every weight assignment of a DWMWIS instance.
//!
//! The search branches on the heaviest undecided vertex (lowest index on equal
//! weights): the *include* branch fixes it to 1 and its neighbours to 0, the
//! *exclude* branch fixes it to 0. The exclude branch is pruned when the sum of
//! its undecided weights (optionally the tighter clique-cover bound) cannot
//! reach the include branch's value. Undecided vertices that fall apart into
//! several connected components are solved independently. Among optimal sets
//! the lexicographically smallest one is returned.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::{ClockMode, CostModel, CpuStopwatch, TimeSource};
use crate::graphs::{DwmwisInstance, WeightedGraph};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BipError {
    #[error("constraint ({0}, {1}) references a vertex outside the weight vector")]
    OutOfRange(usize, usize),
    #[error("weight of vertex {0} must be finite and > 0")]
    NonPositiveWeight(usize),
}

/// `x_i + x_j <= 1`.
pub type Constraint = (usize, usize);

/// One constraint per edge in canonical order.
pub fn build_constraints(graph: &WeightedGraph) -> Vec<Constraint> {
    graph.edges().to_vec()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bound {
    /// Sum of the undecided weights.
    #[default]
    UndecidedSum,
    /// Sum over a greedy clique cover of the undecided vertices of each clique's
    /// heaviest weight. Never looser than [`Bound::UndecidedSum`].
    CliqueCover,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BipSolution {
    /// Selected vertices, ascending.
    pub vertices: Vec<usize>,
    /// Their weight, summed in ascending vertex order.
    pub weight: f64,
    /// Search nodes visited.
    pub nodes: u64,
}

struct Search<'a> {
    weights: &'a [f64],
    adjacency: Vec<Vec<usize>>,
    bound: Bound,
    eps: f64,
    nodes: u64,
    member: Vec<bool>,
}

#[derive(Clone)]
struct Partial {
    vertices: Vec<usize>,
    weight: f64,
}

impl Search<'_> {
    fn components(&mut self, set: &[usize]) -> Vec<Vec<usize>> {
        for &v in set {
            self.member[v] = true;
        }
        let mut out = Vec::new();
        for &start in set {
            if !self.member[start] {
                continue;
            }
            self.member[start] = false;
            let mut comp = vec![start];
            let mut i = 0;
            while i < comp.len() {
                let v = comp[i];
                i += 1;
                for &u in &self.adjacency[v] {
                    if self.member[u] {
                        self.member[u] = false;
                        comp.push(u);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    fn upper_bound(&mut self, set: &[usize]) -> f64 {
        match self.bound {
            Bound::UndecidedSum => set.iter().map(|&v| self.weights[v]).sum(),
            Bound::CliqueCover => {
                // heaviest-first greedy: each vertex joins the first clique it is
                // adjacent to entirely
                let mut order = set.to_vec();
                order.sort_by(|&a, &b| self.weights[b].total_cmp(&self.weights[a]).then(a.cmp(&b)));
                let mut cliques: Vec<Vec<usize>> = Vec::new();
                for v in order {
                    let adj = &self.adjacency[v];
                    match cliques
                        .iter_mut()
                        .find(|c| c.iter().all(|u| adj.binary_search(u).is_ok()))
                    {
                        Some(c) => c.push(v),
                        None => cliques.push(vec![v]),
                    }
                }
                cliques.iter().map(|c| self.weights[c[0]]).sum()
            }
        }
    }

    /// True when `a` beats `b`: heavier by more than eps, or tied and
    /// lexicographically smaller.
    fn better(&self, a: &Partial, b: &Partial) -> bool {
        if a.weight > b.weight + self.eps {
            return true;
        }
        if a.weight < b.weight - self.eps {
            return false;
        }
        a.vertices < b.vertices
    }

    fn solve(&mut self, set: &[usize]) -> Partial {
        self.nodes += 1;
        match set.len() {
            0 => return Partial { vertices: Vec::new(), weight: 0.0 },
            1 => return Partial { vertices: vec![set[0]], weight: self.weights[set[0]] },
            _ => {}
        }
        let comps = self.components(set);
        if comps.len() > 1 {
            let mut vertices = Vec::new();
            let mut weight = 0.0;
            for c in comps {
                let p = self.solve(&c);
                vertices.extend(p.vertices);
                weight += p.weight;
            }
            vertices.sort_unstable();
            return Partial { vertices, weight };
        }

        let v = *set
            .iter()
            .max_by(|&&a, &&b| self.weights[a].total_cmp(&self.weights[b]).then(b.cmp(&a)))
            .expect("nonempty");
        let adj = &self.adjacency[v];
        let rest_in: Vec<usize> = set
            .iter()
            .copied()
            .filter(|&u| u != v && adj.binary_search(&u).is_err())
            .collect();
        let mut include = self.solve(&rest_in);
        include.weight += self.weights[v];
        let pos = include.vertices.partition_point(|&u| u < v);
        include.vertices.insert(pos, v);

        let rest_out: Vec<usize> = set.iter().copied().filter(|&u| u != v).collect();
        if self.upper_bound(&rest_out) < include.weight - self.eps {
            return include;
        }
        let exclude = self.solve(&rest_out);
        if self.better(&exclude, &include) {
            exclude
        } else {
            include
        }
    }
}

/// Exact MWIS via the BIP formulation with the default bound.
pub fn solve_bip(constraints: &[Constraint], weights: &[f64]) -> Result<BipSolution, BipError> {
    solve_bip_with(constraints, weights, Bound::default())
}

pub fn solve_bip_with(constraints: &[Constraint], weights: &[f64], bound: Bound) -> Result<BipSolution, BipError> {
    let n = weights.len();
    for (v, &w) in weights.iter().enumerate() {
        if !(w.is_finite() && w > 0.0) {
            return Err(BipError::NonPositiveWeight(v));
        }
    }
    let mut adjacency = vec![Vec::new(); n];
    for &(i, j) in constraints {
        if i >= n || j >= n {
            return Err(BipError::OutOfRange(i, j));
        }
        adjacency[i].push(j);
        adjacency[j].push(i);
    }
    for list in &mut adjacency {
        list.sort_unstable();
        list.dedup();
    }
    let total: f64 = weights.iter().sum();
    let mut search = Search {
        weights,
        adjacency,
        bound,
        eps: 1e-9 * (1.0 + total),
        nodes: 0,
        member: vec![false; n],
    };
    let all: Vec<usize> = (0..n).collect();
    let best = search.solve(&all);
    let weight = best.vertices.iter().map(|&v| weights[v]).sum();
    Ok(BipSolution { vertices: best.vertices, weight, nodes: search.nodes })
}

/// Classical timing for one DWMWIS instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalLedger {
    pub constraint_builds: usize,
    pub constraints_ms: f64,
    pub per_assignment_ms: Vec<f64>,
    /// T_C: constraint build plus the sum of per-assignment times.
    pub t_c_ms: f64,
    pub clock: ClockMode,
    /// Set when the measured clock had to fall back to wall time.
    pub wall_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalRun {
    pub optima: Vec<BipSolution>,
    pub ledger: ClassicalLedger,
}

/// Solves every weight assignment, building the constraints exactly once.
pub fn solve_dwmwis_classical(
    instance: &DwmwisInstance,
    clock: ClockMode,
    cost: &CostModel,
    bound: Bound,
) -> Result<ClassicalRun, BipError> {
    let sw = CpuStopwatch::start();
    let constraints = build_constraints(&instance.graph);
    let (build_measured, build_source) = sw.elapsed_ms();

    let results: Vec<(BipSolution, f64, TimeSource)> = instance
        .weight_sets
        .par_iter()
        .map(|weights| {
            let sw = CpuStopwatch::start();
            let sol = solve_bip_with(&constraints, weights, bound)?;
            let (ms, source) = sw.elapsed_ms();
            Ok((sol, ms, source))
        })
        .collect::<Result<_, BipError>>()?;

    let wall_fallback = build_source == TimeSource::Wall || results.iter().any(|r| r.2 == TimeSource::Wall);
    let (constraints_ms, per_assignment_ms): (f64, Vec<f64>) = match clock {
        ClockMode::Measured => (build_measured, results.iter().map(|r| r.1).collect()),
        ClockMode::Counted => (
            CostModel::ms(constraints.len().max(1) as u64, cost.constraint_ns_per_edge),
            results.iter().map(|r| CostModel::ms(r.0.nodes, cost.bnb_ns_per_node)).collect(),
        ),
    };
    let t_c_ms = constraints_ms + per_assignment_ms.iter().sum::<f64>();
    Ok(ClassicalRun {
        optima: results.into_iter().map(|r| r.0).collect(),
        ledger: ClassicalLedger {
            constraint_builds: 1,
            constraints_ms,
            per_assignment_ms,
            t_c_ms,
            clock,
            wall_fallback: clock == ClockMode::Measured && wall_fallback,
        },
    })
}
