//! Hybrid quantum-classical annealing for the dynamically weighted maximum-weight
//! independent set problem (DWMWIS).
//!
//! The pipeline mirrors a D-Wave style workflow with a classical stand-in for the
//! annealer:
//!
//! * [`graphs`]: weighted graphs, family generators, DWMWIS instances, text format.
//! * [`qubo`]: the MWIS penalty QUBO, evaluation, decoding and a brute-force oracle.
//! * [`hardware`]: Chimera topology with an inactive-qubit mask.
//! * [`embedding`]: heuristic minor embedding, verification, embedded QUBOs, unembedding.
//! * [`sampler`]: simulated annealing sampler and the annealer timing model.
//! * [`baseline`]: exact branch-and-bound solver for the BIP formulation.
//! * [`metrics`]: k99, timing ledgers and the T_H / T_std / T_C / R_C aggregates.
//! * [`harness`]: corpus configuration, the three algorithms, and report files.

pub mod baseline;
pub mod clock;
pub mod embedding;
pub mod graphs;
pub mod hardware;
pub mod harness;
pub mod metrics;
pub mod qubo;
pub mod sampler;
pub mod seed;

pub use baseline::{build_constraints, solve_bip, solve_dwmwis_classical, BipSolution};
pub use embedding::{find_embedding, verify_embedding, Embedding, EmbeddingStats};
pub use graphs::{DwmwisInstance, GraphFamily, WeightedGraph};
pub use hardware::ChimeraGraph;
pub use metrics::{k99, K99};
pub use qubo::{Assignment, QuboMatrix};
pub use sampler::{AnnealSchedule, SampleSet, TimingModel};
