//! Simulated-annealing stand-in for the annealer, plus its timing model.
//!
//! Each read is an independent single-spin-flip Metropolis anneal with a
//! geometric temperature schedule, finished by one zero-temperature sweep.
//! Read `r` draws from its own stream seeded with `derive(seed, READ, r)`, so
//! results do not depend on how reads are spread over threads, and the first
//! `r` reads of a larger batch are exactly the reads of a smaller one.
//!
//! Annealer time is never taken from the wall clock: it is charged through
//! [`TimingModel`]. SA wall time is recorded separately on the [`SampleSet`].

use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qubo::{Assignment, QuboAdjacency, QuboMatrix};
use crate::seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("at least one read is required")]
    NoReads,
    #[error("invalid schedule: {0}")]
    BadSchedule(String),
    #[error("sample set is empty")]
    Empty,
    #[error("tolerance must be nonnegative")]
    NegativeTolerance,
}

/// Geometric cooling schedule. Unset temperatures are derived from the QUBO.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnealSchedule {
    pub sweeps: usize,
    pub t_initial: Option<f64>,
    pub t_final: Option<f64>,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        AnnealSchedule { sweeps: 64, t_initial: None, t_final: None }
    }
}

impl AnnealSchedule {
    /// Fills in automatic temperatures: the hot end accepts the largest single
    /// flip cost with probability 1/2, the cold end accepts the smallest nonzero
    /// coefficient with probability 1/100.
    pub fn resolve(&self, q: &QuboMatrix) -> Result<(f64, f64), SamplerError> {
        if self.sweeps == 0 {
            return Err(SamplerError::BadSchedule("sweeps must be at least 1".into()));
        }
        let adj = q.adjacency();
        let max_delta = (0..q.dim())
            .map(|i| adj.diag[i].abs() + adj.neighbors[i].iter().map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let min_coeff = q
            .entries()
            .map(|(_, _, v)| v.abs())
            .filter(|v| *v > 0.0)
            .fold(f64::INFINITY, f64::min);
        let auto_hot = if max_delta > 0.0 { max_delta / 2f64.ln() } else { 1.0 };
        let auto_cold = if min_coeff.is_finite() { min_coeff / 100f64.ln() } else { 1e-3 };
        let hot = self.t_initial.unwrap_or(auto_hot);
        let cold = self.t_final.unwrap_or(auto_cold.min(hot));
        if !(hot > 0.0 && cold > 0.0 && hot >= cold) {
            return Err(SamplerError::BadSchedule(format!(
                "temperatures must satisfy t_initial >= t_final > 0, got {hot} and {cold}"
            )));
        }
        Ok((hot, cold))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub assignment: Assignment,
    pub energy: f64,
    pub count: usize,
}

/// Distinct assignments with their energies and occurrence counts, sorted by
/// energy and then by assignment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleSet {
    pub samples: Vec<Sample>,
    pub reads: usize,
    pub sweeps: usize,
    pub t_initial: f64,
    pub t_final: f64,
    pub seed: u64,
    /// Wall time spent annealing; never mixed into annealer time.
    #[serde(skip)]
    pub wall_ms: f64,
}

/// Equality ignores `wall_ms`.
impl PartialEq for SampleSet {
    fn eq(&self, other: &Self) -> bool {
        self.samples == other.samples
            && self.reads == other.reads
            && self.sweeps == other.sweeps
            && self.t_initial == other.t_initial
            && self.t_final == other.t_final
            && self.seed == other.seed
    }
}

impl SampleSet {
    pub fn best(&self) -> Option<&Sample> {
        self.samples.first()
    }

    pub fn total_count(&self) -> usize {
        self.samples.iter().map(|s| s.count).sum()
    }

    /// `energy,count,bits` with one row per distinct assignment.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("energy,count,bits\n");
        for s in &self.samples {
            out.push_str(&format!("{},{},{}\n", s.energy, s.count, s.assignment.bits()));
        }
        out
    }
}

fn anneal_read(adj: &QuboAdjacency, temps: &[f64], rng: &mut seed::Rng) -> Vec<bool> {
    let n = adj.diag.len();
    let mut x: Vec<bool> = (0..n).map(|_| rng.random()).collect();
    // field[i] = Q_ii + sum_j Q_ij x_j; flipping i changes energy by ±field[i]
    let mut field = adj.diag.clone();
    for (nbrs, _) in adj.neighbors.iter().zip(&x).filter(|(_, &on)| on) {
        for &(j, v) in nbrs {
            field[j] += v;
        }
    }
    let flip = |i: usize, x: &mut Vec<bool>, field: &mut Vec<f64>| {
        let sign = if x[i] { -1.0 } else { 1.0 };
        x[i] = !x[i];
        for &(j, v) in &adj.neighbors[i] {
            field[j] += sign * v;
        }
    };
    for &t in temps {
        for i in 0..n {
            let delta = if x[i] { -field[i] } else { field[i] };
            if delta <= 0.0 || rng.random::<f64>() < (-delta / t).exp() {
                flip(i, &mut x, &mut field);
            }
        }
    }
    // quench
    for i in 0..n {
        let delta = if x[i] { -field[i] } else { field[i] };
        if delta < 0.0 {
            flip(i, &mut x, &mut field);
        }
    }
    x
}

/// Runs `reads` independent anneals on `q`.
pub fn sample(q: &QuboMatrix, schedule: &AnnealSchedule, reads: usize, seed: u64) -> Result<SampleSet, SamplerError> {
    if reads == 0 {
        return Err(SamplerError::NoReads);
    }
    let start = Instant::now();
    let (hot, cold) = schedule.resolve(q)?;
    let sweeps = schedule.sweeps;
    let temps: Vec<f64> = (0..sweeps)
        .map(|s| {
            if sweeps == 1 {
                cold
            } else {
                hot * (cold / hot).powf(s as f64 / (sweeps - 1) as f64)
            }
        })
        .collect();
    let adj = q.adjacency();
    let states: Vec<Vec<bool>> = (0..reads)
        .into_par_iter()
        .map(|r| {
            let mut rng = seed::rng(seed::derive(seed, seed::tag::READ, r as u64));
            anneal_read(&adj, &temps, &mut rng)
        })
        .collect();

    let mut counts: BTreeMap<Assignment, usize> = BTreeMap::new();
    for s in states {
        *counts.entry(Assignment(s)).or_insert(0) += 1;
    }
    let mut samples: Vec<Sample> = counts
        .into_iter()
        .map(|(assignment, count)| {
            let energy = q.evaluate(&assignment).expect("sampler preserves dimension");
            Sample { assignment, energy, count }
        })
        .collect();
    samples.sort_by(|a, b| a.energy.total_cmp(&b.energy).then_with(|| a.assignment.cmp(&b.assignment)));
    debug_assert!(samples.iter().all(|s| q.evaluate(&s.assignment) == Ok(s.energy)));

    Ok(SampleSet {
        samples,
        reads,
        sweeps,
        t_initial: hot,
        t_final: cold,
        seed,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Fraction of reads with energy `<= optimum + tol`.
pub fn success_probability(samples: &SampleSet, optimum: f64, tol: f64) -> Result<f64, SamplerError> {
    if tol < 0.0 {
        return Err(SamplerError::NegativeTolerance);
    }
    let total = samples.total_count();
    if total == 0 {
        return Err(SamplerError::Empty);
    }
    let hits: usize = samples.samples.iter().filter(|s| s.energy <= optimum + tol).map(|s| s.count).sum();
    Ok(hits as f64 / total as f64)
}

/// Annealer cost constants, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimingModel {
    pub t_prog_ms: f64,
    pub t_anneal_ms: f64,
    pub t_post_ms: f64,
}

impl Default for TimingModel {
    fn default() -> Self {
        TimingModel { t_prog_ms: 20.0, t_anneal_ms: 0.309, t_post_ms: 20.0 }
    }
}

impl TimingModel {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if [self.t_prog_ms, self.t_anneal_ms, self.t_post_ms].iter().all(|t| t.is_finite() && *t >= 0.0) {
            Ok(())
        } else {
            Err(SamplerError::BadSchedule("timing model entries must be finite and >= 0".into()))
        }
    }
}

/// `t_proc = t_prog + k * t_anneal`, in milliseconds.
pub fn simulated_quantum_time(model: &TimingModel, k: u64) -> f64 {
    model.t_prog_ms + k as f64 * model.t_anneal_ms
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{GraphFamily, WeightedGraph};
    use crate::qubo::{brute_force_qubo, mwis_to_qubo};

    #[test]
    fn edgeless_reaches_all_ones() {
        let g = WeightedGraph::new(3, [], vec![0.2, 0.5, 0.9]).unwrap();
        let q = mwis_to_qubo(&g, None).unwrap();
        let s = sample(&q, &AnnealSchedule::default(), 20, 5).unwrap();
        assert_eq!(s.best().unwrap().assignment.bits(), "111");
        assert_eq!(s.total_count(), 20);
    }

    #[test]
    fn edge_graph_finds_optimum() {
        let g = WeightedGraph::new(2, [(0, 1)], vec![0.3, 0.7]).unwrap();
        let q = mwis_to_qubo(&g, Some(1.7)).unwrap();
        let (_, opt) = brute_force_qubo(&q, 24).unwrap();
        let s = sample(&q, &AnnealSchedule::default(), 100, 11).unwrap();
        assert_eq!(s.best().unwrap().energy, opt);
        let frac = success_probability(&s, opt, 1e-9).unwrap();
        assert!(frac > 0.0 && frac <= 1.0);
    }

    #[test]
    fn seeded_determinism_and_energy_soundness() {
        let g = GraphFamily::Cycle(9).generate().unwrap();
        let q = mwis_to_qubo(&g, None).unwrap();
        let a = sample(&q, &AnnealSchedule::default(), 50, 3).unwrap();
        let b = sample(&q, &AnnealSchedule::default(), 50, 3).unwrap();
        assert_eq!(a, b);
        for s in &a.samples {
            assert_eq!(q.evaluate(&s.assignment).unwrap(), s.energy);
            assert!(s.count >= 1);
        }
    }

    #[test]
    fn best_energy_is_monotone_in_reads() {
        let g = GraphFamily::Grid { rows: 3, cols: 4 }.generate().unwrap()
            .with_weights(&[0.3, 0.9, 0.1, 0.5, 0.7, 0.2, 0.8, 0.4, 0.6, 0.35, 0.45, 0.55]).unwrap();
        let q = mwis_to_qubo(&g, None).unwrap();
        let schedule = AnnealSchedule { sweeps: 4, ..AnnealSchedule::default() };
        let mut last = f64::INFINITY;
        for reads in [1, 2, 5, 10, 40, 100] {
            let best = sample(&q, &schedule, reads, 21).unwrap().best().unwrap().energy;
            assert!(best <= last);
            last = best;
        }
    }

    #[test]
    fn success_probability_counts() {
        let mk = |energies: &[(f64, usize)]| SampleSet {
            samples: energies
                .iter()
                .map(|&(energy, count)| Sample { assignment: Assignment::zeros(1), energy, count })
                .collect(),
            reads: energies.iter().map(|e| e.1).sum(),
            sweeps: 1,
            t_initial: 1.0,
            t_final: 1.0,
            seed: 0,
            wall_ms: 0.0,
        };
        assert_eq!(success_probability(&mk(&[(-1.0, 100)]), -1.0, 0.0).unwrap(), 1.0);
        assert_eq!(success_probability(&mk(&[(0.0, 100)]), -1.0, 0.0).unwrap(), 0.0);
        assert_eq!(success_probability(&mk(&[(-1.0, 37), (0.5, 63)]), -1.0, 1e-9).unwrap(), 0.37);
        assert_eq!(success_probability(&mk(&[]), -1.0, 0.0), Err(SamplerError::Empty));
        assert_eq!(success_probability(&mk(&[(-1.0, 1)]), -1.0, -0.1), Err(SamplerError::NegativeTolerance));
    }

    #[test]
    fn preconditions() {
        let q = mwis_to_qubo(&WeightedGraph::unit(2, [(0, 1)]).unwrap(), None).unwrap();
        assert_eq!(sample(&q, &AnnealSchedule::default(), 0, 1), Err(SamplerError::NoReads));
        let bad = AnnealSchedule { sweeps: 0, ..AnnealSchedule::default() };
        assert!(sample(&q, &bad, 1, 1).is_err());
        let inverted = AnnealSchedule { sweeps: 8, t_initial: Some(0.1), t_final: Some(1.0) };
        assert!(sample(&q, &inverted, 1, 1).is_err());
    }

    #[test]
    fn quantum_time_examples() {
        let m = TimingModel::default();
        assert!((simulated_quantum_time(&m, 1) - 20.309).abs() < 1e-12);
        assert_eq!(simulated_quantum_time(&m, 0), 20.0);
        assert!((simulated_quantum_time(&m, 100) - 50.9).abs() < 1e-12);
    }

    #[test]
    fn csv_dump() {
        let g = WeightedGraph::new(2, [(0, 1)], vec![0.3, 0.7]).unwrap();
        let q = mwis_to_qubo(&g, Some(1.7)).unwrap();
        let s = sample(&q, &AnnealSchedule::default(), 10, 1).unwrap();
        let csv = s.to_csv();
        assert!(csv.starts_with("energy,count,bits\n-0.7,"));
        assert_eq!(csv.lines().count(), s.samples.len() + 1);
    }
}
