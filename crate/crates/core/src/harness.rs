//! Experiment orchestration: corpus expansion, the three algorithms and the
//! report files.
//!
//! Seed flow, from the single root seed:
//!
//! ```text
//! instance  = derive_named(root, INSTANCE, id)
//! embed     = derive(instance, EMBED, 0)          re-embed i: derive(instance, EMBED, i)
//! repeat r  = derive(instance, EMBED_REPEAT, r)
//! sample i  = derive(instance, SAMPLE, i)
//! ```

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baseline::{solve_dwmwis_classical, Bound, BipError, ClassicalLedger, ClassicalRun};
use crate::clock::{ClockMode, CostModel};
use crate::embedding::{find_embedding, EmbedError, EmbedOptions, EmbeddedTemplate, Embedding, EmbeddingStats};
use crate::graphs::{family_instance, DwmwisInstance, GraphError, GraphFamily};
use crate::hardware::{ChimeraGraph, HardwareError, DEFAULT_ACTIVE, DEFAULT_GRID};
use crate::metrics::{
    aggregate, corpus_csv, detail_csv, k99, DwmwisReport, MetricsError, Spread, TimingLedger, AssignmentRow,
};
use crate::qubo::{mwis_to_qubo, QuboError};
use crate::sampler::{sample, AnnealSchedule, SamplerError, TimingModel};
use crate::embedding::unembed_sample;
use crate::seed::{self, tag};

/// Overrides `output_dir` from the config file.
pub const OUTPUT_DIR_ENV: &str = "HYBRID_ANNEAL_OUTPUT_DIR";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Hardware(#[from] HardwareError),
    #[error(transparent)]
    Qubo(#[from] QuboError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Bip(#[from] BipError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("{instance}: not embeddable ({reason})")]
    Unembeddable { instance: String, reason: String },
    #[error("{instance}: assignment {assignment} produced a dependent set")]
    InvalidSolution { instance: String, assignment: usize },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

/// One manifest line: a family kind and a size list such as `3..=12`,
/// `4,6,8` or `3x3,4x5`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusGroup {
    pub family: String,
    pub sizes: String,
}

impl CorpusGroup {
    pub fn expand(&self) -> Result<Vec<GraphFamily>, HarnessError> {
        let bad = |msg: String| HarnessError::Config(format!("corpus group {:?}: {msg}", self.family));
        let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad(format!("bad size {s:?}")));
        let mut out = Vec::new();
        for item in self.sizes.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            if let Some((r, c)) = item.split_once('x') {
                let (r, c) = (num(r)?, num(c)?);
                out.push(match self.family.as_str() {
                    "grid" => GraphFamily::Grid { rows: r, cols: c },
                    "bipartite" => GraphFamily::Bipartite { left: r, right: c },
                    other => return Err(bad(format!("{other} takes a single size, got {item:?}"))),
                });
                continue;
            }
            let range: Vec<usize> = if let Some((a, b)) = item.split_once("..=") {
                (num(a)?..=num(b)?).collect()
            } else if let Some((a, b)) = item.split_once("..") {
                (num(a)?..num(b)?).collect()
            } else {
                vec![num(item)?]
            };
            for n in range {
                out.push(match self.family.as_str() {
                    "cycle" => GraphFamily::Cycle(n),
                    "star" => GraphFamily::Star(n),
                    "complete" => GraphFamily::Complete(n),
                    "path" => GraphFamily::Path(n),
                    "grid" | "bipartite" => return Err(bad(format!("expected RxC, got {item:?}"))),
                    other => return Err(bad(format!("unknown family {other:?}"))),
                });
            }
        }
        for f in &out {
            f.validate()?;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HardwareConfig {
    pub k: usize,
    /// Random inactive qubits, ignored when `inactive` is given.
    pub inactive_count: usize,
    pub mask_seed: u64,
    pub inactive: Option<Vec<usize>>,
}

impl Default for HardwareConfig {
    fn default() -> Self {
        HardwareConfig {
            k: DEFAULT_GRID,
            inactive_count: 8 * DEFAULT_GRID * DEFAULT_GRID - DEFAULT_ACTIVE,
            mask_seed: 0,
            inactive: None,
        }
    }
}

impl HardwareConfig {
    pub fn build(&self) -> Result<ChimeraGraph, HardwareError> {
        match &self.inactive {
            Some(list) => ChimeraGraph::build(self.k, list),
            None => ChimeraGraph::with_random_inactive(self.k, self.inactive_count, self.mask_seed),
        }
    }
}

/// How the standard algorithm pays for embeddings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StandardMode {
    /// Reuse the hybrid embedding and charge `t_embed` per assignment.
    #[default]
    ChargeOnly,
    /// Compute a fresh embedding for every assignment.
    ReEmbed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub corpus: Vec<CorpusGroup>,
    #[serde(default = "defaults::m")]
    pub m: usize,
    #[serde(default)]
    pub root_seed: u64,
    #[serde(default = "defaults::reads")]
    pub reads: usize,
    #[serde(default = "defaults::target")]
    pub target_probability: f64,
    #[serde(default = "defaults::repeats")]
    pub embed_repeats: usize,
    #[serde(default)]
    pub standard_mode: StandardMode,
    #[serde(default)]
    pub clock: ClockMode,
    #[serde(default)]
    pub bound: Bound,
    #[serde(default = "defaults::output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub hardware: HardwareConfig,
    #[serde(default)]
    pub schedule: AnnealSchedule,
    #[serde(default)]
    pub timing: TimingModel,
    #[serde(default)]
    pub embed: EmbedOptions,
    #[serde(default)]
    pub cost: CostModel,
}

mod defaults {
    use std::path::PathBuf;

    pub fn m() -> usize {
        10
    }
    pub fn reads() -> usize {
        1000
    }
    pub fn target() -> f64 {
        0.99
    }
    pub fn repeats() -> usize {
        10
    }
    pub fn output_dir() -> PathBuf {
        PathBuf::from("out")
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }

    /// Applies [`OUTPUT_DIR_ENV`] when set and nonempty.
    pub fn apply_env(&mut self) {
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV).filter(|d| !d.is_empty()) {
            self.output_dir = PathBuf::from(dir);
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |m: &str| Err(HarnessError::Config(m.into()));
        if self.m == 0 {
            return fail("m must be at least 1");
        }
        if self.reads == 0 {
            return fail("reads must be at least 1");
        }
        if !(self.target_probability > 0.0 && self.target_probability < 1.0) {
            return fail("target_probability must lie in (0, 1)");
        }
        self.timing.validate()?;
        self.families()?;
        Ok(())
    }

    /// Expanded manifest in file order. Duplicate instances are rejected.
    pub fn families(&self) -> Result<Vec<GraphFamily>, HarnessError> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for group in &self.corpus {
            for f in group.expand()? {
                if !seen.insert(f.to_string()) {
                    return Err(HarnessError::Config(format!("instance {f} listed twice")));
                }
                out.push(f);
            }
        }
        Ok(out)
    }

    pub fn instance_seed(&self, id: &str) -> u64 {
        seed::derive_named(self.root_seed, tag::INSTANCE, id)
    }

    pub fn instance(&self, family: GraphFamily) -> Result<DwmwisInstance, HarnessError> {
        let id = family.to_string();
        Ok(family_instance(family, self.m, self.instance_seed(&id))?)
    }

    pub fn instances(&self) -> Result<Vec<DwmwisInstance>, HarnessError> {
        self.families()?.into_iter().map(|f| self.instance(f)).collect()
    }
}

/// Best set found for one weight assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub vertices: Vec<usize>,
    pub weight: f64,
    /// Matches the classical optimum.
    pub optimal: bool,
    /// Broken chains in the read that produced this set.
    pub broken_chains: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeRun {
    pub solutions: Vec<Solution>,
    pub ledger: TimingLedger,
    #[serde(skip)]
    pub wall_ms: f64,
}

/// Fixed penalty and chain strength for a whole DWMWIS instance, so that the
/// embedded QUBOs differ only in their diagonals.
fn instance_constants(instance: &DwmwisInstance) -> (f64, f64) {
    let w = instance.max_weight();
    let penalty = w + 1.0;
    (penalty, 2.0 * (penalty + w))
}

fn optimum_tolerance(optimum: f64) -> f64 {
    1e-9 * (1.0 + optimum.abs())
}

fn check_embeddable(instance: &DwmwisInstance, hardware: &ChimeraGraph, embed_seed: u64, cfg: &ExperimentConfig)
    -> Result<(Embedding, EmbeddingStats), HarnessError> {
    find_embedding(&instance.graph, hardware, embed_seed, &cfg.embed).map_err(|e| match e {
        EmbedError::NotFound { reason, .. } => HarnessError::Unembeddable { instance: instance.id.clone(), reason },
        other => other.into(),
    })
}

/// Samples one weight assignment on an existing embedding.
fn solve_assignment(
    instance: &DwmwisInstance,
    i: usize,
    template: &EmbeddedTemplate,
    embedding: &Embedding,
    optimum: f64,
    cfg: &ExperimentConfig,
) -> Result<(Solution, AssignmentRow), HarnessError> {
    let weights = &instance.weight_sets[i];
    let graph = instance.weighted(i);

    let t0 = Instant::now();
    let q = template.with_weights(weights);
    let conv_wall = t0.elapsed().as_secs_f64() * 1e3;
    let t0 = Instant::now();
    cfg.schedule.resolve(&q)?;
    let pre_wall = t0.elapsed().as_secs_f64() * 1e3;

    let set = sample(&q, &cfg.schedule, cfg.reads, seed::derive(cfg.instance_seed(&instance.id), tag::SAMPLE, i as u64))?;
    let tol = optimum_tolerance(optimum);
    let mut n_opt = 0;
    let mut best: Option<Solution> = None;
    for s in &set.samples {
        let (logical, broken) = unembed_sample(&s.assignment, embedding, &graph)?;
        let vertices = logical.ones();
        if !graph.is_independent(&vertices) {
            return Err(HarnessError::InvalidSolution { instance: instance.id.clone(), assignment: i });
        }
        let weight = graph.set_weight(&vertices);
        let optimal = weight >= optimum - tol;
        if optimal {
            n_opt += s.count;
        }
        let better = match &best {
            None => true,
            Some(b) => weight > b.weight + tol || (weight >= b.weight - tol && vertices < b.vertices),
        };
        if better {
            best = Some(Solution { vertices, weight, optimal, broken_chains: broken });
        }
    }
    let solution = best.ok_or(SamplerError::Empty)?;

    let (t_conv_ms, t_pre_ms) = match cfg.clock {
        ClockMode::Counted => {
            let entries = CostModel::ms(q.len() as u64, cfg.cost.qubo_ns_per_entry);
            (entries, entries)
        }
        ClockMode::Measured => (conv_wall, pre_wall),
    };
    let row = AssignmentRow {
        t_conv_ms,
        t_pre_ms,
        t_prog_ms: cfg.timing.t_prog_ms,
        t_anneal_ms: cfg.timing.t_anneal_ms,
        t_post_ms: cfg.timing.t_post_ms,
        reads: set.total_count(),
        n_opt,
        k99: k99(n_opt as f64 / set.total_count() as f64, cfg.target_probability)?,
        t_embed_ms: None,
    };
    Ok((solution, row))
}

fn new_ledger(instance: &DwmwisInstance, t_embed_ms: f64, embed_calls: usize, classical: &ClassicalRun) -> TimingLedger {
    TimingLedger {
        instance: instance.id.clone(),
        family: instance.family.map(|f| f.kind().to_string()),
        n_vertices: instance.graph.n(),
        t_embed_ms,
        embed_repeats_ms: Vec::new(),
        embed_calls,
        rows: Vec::new(),
        t_c_ms: Some(classical.ledger.t_c_ms),
    }
}

pub fn run_classical(instance: &DwmwisInstance, cfg: &ExperimentConfig) -> Result<ClassicalRun, HarnessError> {
    Ok(solve_dwmwis_classical(instance, cfg.clock, &cfg.cost, cfg.bound)?)
}

/// Embeds once, then samples every weight assignment on that embedding.
pub fn run_hybrid(
    instance: &DwmwisInstance,
    cfg: &ExperimentConfig,
    hardware: &ChimeraGraph,
    classical: &ClassicalRun,
) -> Result<ModeRun, HarnessError> {
    let start = Instant::now();
    let embed_seed = seed::derive(cfg.instance_seed(&instance.id), tag::EMBED, 0);
    let (embedding, stats) = check_embeddable(instance, hardware, embed_seed, cfg)?;
    let (penalty, chain) = instance_constants(instance);
    let logical_q = mwis_to_qubo(&instance.weighted(0), Some(penalty))?;
    let template = EmbeddedTemplate::new(&logical_q, &embedding, hardware, chain)?;

    let results: Vec<(Solution, AssignmentRow)> = (0..instance.m())
        .into_par_iter()
        .map(|i| solve_assignment(instance, i, &template, &embedding, classical.optima[i].weight, cfg))
        .collect::<Result<_, _>>()?;

    let mut ledger = new_ledger(instance, stats.t_embed_ms(cfg.clock, &cfg.cost), 1, classical);
    let (solutions, rows) = results.into_iter().unzip();
    ledger.rows = rows;
    Ok(ModeRun { solutions, ledger, wall_ms: start.elapsed().as_secs_f64() * 1e3 })
}

/// Standard algorithm. Charge-only derives from the hybrid run; re-embed
/// recomputes the embedding for every assignment (assignment 0 reuses the
/// hybrid embedding seed).
pub fn run_standard(
    instance: &DwmwisInstance,
    cfg: &ExperimentConfig,
    hardware: &ChimeraGraph,
    classical: &ClassicalRun,
    hybrid: &ModeRun,
) -> Result<ModeRun, HarnessError> {
    match cfg.standard_mode {
        StandardMode::ChargeOnly => {
            let mut run = hybrid.clone();
            run.ledger.embed_calls = 1;
            for row in &mut run.ledger.rows {
                row.t_embed_ms = Some(hybrid.ledger.t_embed_ms);
            }
            Ok(run)
        }
        StandardMode::ReEmbed => {
            let start = Instant::now();
            let inst_seed = cfg.instance_seed(&instance.id);
            let (penalty, chain) = instance_constants(instance);
            let logical_q = mwis_to_qubo(&instance.weighted(0), Some(penalty))?;
            let results: Vec<(Solution, AssignmentRow)> = (0..instance.m())
                .into_par_iter()
                .map(|i| {
                    let (embedding, stats) = check_embeddable(instance, hardware, seed::derive(inst_seed, tag::EMBED, i as u64), cfg)?;
                    let template = EmbeddedTemplate::new(&logical_q, &embedding, hardware, chain)?;
                    let (sol, mut row) = solve_assignment(instance, i, &template, &embedding, classical.optima[i].weight, cfg)?;
                    row.t_embed_ms = Some(stats.t_embed_ms(cfg.clock, &cfg.cost));
                    Ok((sol, row))
                })
                .collect::<Result<_, HarnessError>>()?;
            let mut ledger = new_ledger(instance, hybrid.ledger.t_embed_ms, instance.m(), classical);
            ledger.embed_repeats_ms = hybrid.ledger.embed_repeats_ms.clone();
            let (solutions, rows) = results.into_iter().unzip();
            ledger.rows = rows;
            Ok(ModeRun { solutions, ledger, wall_ms: start.elapsed().as_secs_f64() * 1e3 })
        }
    }
}

/// Independent embeddings for the spread of `t_embed`. Failed repeats are left out.
pub fn embed_repeats(instance: &DwmwisInstance, cfg: &ExperimentConfig, hardware: &ChimeraGraph) -> Vec<f64> {
    let inst_seed = cfg.instance_seed(&instance.id);
    (0..cfg.embed_repeats)
        .into_par_iter()
        .filter_map(|r| {
            find_embedding(&instance.graph, hardware, seed::derive(inst_seed, tag::EMBED_REPEAT, r as u64), &cfg.embed)
                .ok()
                .map(|(_, stats)| stats.t_embed_ms(cfg.clock, &cfg.cost))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Status {
    Done,
    Skipped { reason: String },
    Failed { error: String },
}

/// Everything recorded for one DWMWIS instance; stored as `ledgers/<id>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    /// Position in the manifest.
    pub order: usize,
    pub instance: String,
    pub family: Option<String>,
    pub n_vertices: usize,
    pub m: usize,
    #[serde(flatten)]
    pub status: Status,
    pub classical: Option<ClassicalLedger>,
    pub optima: Vec<f64>,
    pub hybrid: Option<TimingLedger>,
    pub standard: Option<TimingLedger>,
    pub hybrid_solutions: Vec<Solution>,
    pub standard_solutions: Vec<Solution>,
    #[serde(skip)]
    pub wall: WallTimes,
}

/// Non-deterministic timings, kept out of the ledgers.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WallTimes {
    pub classical_ms: f64,
    pub hybrid_ms: f64,
    pub standard_ms: f64,
}

impl InstanceRecord {
    /// Corpus row: `T_H` from the hybrid ledger, `T_std` from the standard one.
    pub fn report(&self) -> Result<Option<DwmwisReport>, HarnessError> {
        let (Some(h), Some(s)) = (&self.hybrid, &self.standard) else {
            return Ok(None);
        };
        let mut report = aggregate(h)?;
        report.t_std_ms = aggregate(s)?.t_std_ms;
        Ok(Some(report))
    }

    pub fn mismatches(&self) -> usize {
        self.hybrid_solutions.iter().chain(&self.standard_solutions).filter(|s| !s.optimal).count()
    }
}

/// Classical, hybrid and standard runs for one instance.
pub fn run_instance(
    order: usize,
    instance: &DwmwisInstance,
    cfg: &ExperimentConfig,
    hardware: &ChimeraGraph,
) -> InstanceRecord {
    let mut record = InstanceRecord {
        order,
        instance: instance.id.clone(),
        family: instance.family.map(|f| f.kind().to_string()),
        n_vertices: instance.graph.n(),
        m: instance.m(),
        status: Status::Done,
        classical: None,
        optima: Vec::new(),
        hybrid: None,
        standard: None,
        hybrid_solutions: Vec::new(),
        standard_solutions: Vec::new(),
        wall: WallTimes::default(),
    };
    let result = (|| -> Result<(), HarnessError> {
        let t0 = Instant::now();
        let classical = run_classical(instance, cfg)?;
        record.wall.classical_ms = t0.elapsed().as_secs_f64() * 1e3;
        record.optima = classical.optima.iter().map(|o| o.weight).collect();
        record.classical = Some(classical.ledger.clone());

        let mut hybrid = run_hybrid(instance, cfg, hardware, &classical)?;
        hybrid.ledger.embed_repeats_ms = embed_repeats(instance, cfg, hardware);
        let standard = run_standard(instance, cfg, hardware, &classical, &hybrid)?;
        record.wall.hybrid_ms = hybrid.wall_ms;
        record.wall.standard_ms = standard.wall_ms;
        record.hybrid_solutions = hybrid.solutions;
        record.standard_solutions = standard.solutions;
        record.hybrid = Some(hybrid.ledger);
        record.standard = Some(standard.ledger);
        Ok(())
    })();
    match result {
        Ok(()) => {}
        Err(HarnessError::Unembeddable { reason, .. }) => {
            tracing::warn!(instance = %instance.id, %reason, "skipped");
            record.status = Status::Skipped { reason };
        }
        Err(e) => {
            tracing::error!(instance = %instance.id, error = %e, "failed");
            record.status = Status::Failed { error: e.to_string() };
        }
    }
    record
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub instances: usize,
    pub done: usize,
    pub skipped: usize,
    pub failed: usize,
    pub unsolved_rows: usize,
    pub mismatches: usize,
    pub output_dir: PathBuf,
}

impl CorpusSummary {
    pub fn has_hard_failure(&self) -> bool {
        self.failed > 0
    }
}

/// Runs every instance of the manifest and writes the report files.
pub fn run_corpus(cfg: &ExperimentConfig) -> Result<(CorpusSummary, Vec<InstanceRecord>), HarnessError> {
    cfg.validate()?;
    let hardware = cfg.hardware.build()?;
    let instances = cfg.instances()?;
    let records: Vec<InstanceRecord> = instances
        .par_iter()
        .enumerate()
        .map(|(order, inst)| {
            tracing::info!(instance = %inst.id, "running");
            run_instance(order, inst, cfg, &hardware)
        })
        .collect();
    let summary = write_reports(&cfg.output_dir, &records, true)?;
    fs::write(cfg.output_dir.join("config.toml"), cfg.to_toml()).map_err(io_err(&cfg.output_dir))?;
    Ok((summary, records))
}

fn write_file(path: &Path, text: &str) -> Result<(), HarnessError> {
    fs::write(path, text).map_err(io_err(path))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// Writes corpus, detail, skip and plot CSVs (and, when `with_ledgers`, the
/// per-instance JSON ledgers plus `wall_clock.csv`).
pub fn write_reports(dir: &Path, records: &[InstanceRecord], with_ledgers: bool) -> Result<CorpusSummary, HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut sorted: Vec<&InstanceRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.order);

    let mut summary = CorpusSummary { instances: sorted.len(), output_dir: dir.to_path_buf(), ..Default::default() };
    let mut reports = Vec::new();
    let mut ledgers = Vec::new();
    let mut skipped = String::from("instance,family,n_vertices,status,reason\n");
    for r in &sorted {
        match &r.status {
            Status::Done => summary.done += 1,
            Status::Skipped { reason } => {
                summary.skipped += 1;
                skipped.push_str(&format!("{},{},{},skipped,{}\n", r.instance, r.family.as_deref().unwrap_or(""), r.n_vertices, reason.replace(',', ";")));
            }
            Status::Failed { error } => {
                summary.failed += 1;
                skipped.push_str(&format!("{},{},{},failed,{}\n", r.instance, r.family.as_deref().unwrap_or(""), r.n_vertices, error.replace(',', ";")));
            }
        }
        summary.mismatches += r.mismatches();
        if let Some(report) = r.report()? {
            summary.unsolved_rows += report.unsolved_count;
            reports.push(report);
        }
        if let Some(h) = &r.hybrid {
            ledgers.push(h.clone());
        }
    }

    write_file(&dir.join("corpus.csv"), &corpus_csv(&reports))?;
    write_file(&dir.join("detail.csv"), &detail_csv(&ledgers))?;
    write_file(&dir.join("skipped.csv"), &skipped)?;

    let mut t_embed = String::from("instance,family,n_vertices,t_embed_ms,min_ms,max_ms,mean_ms,median_ms\n");
    let mut r_c_n = String::from("instance,family,n_vertices,R_C\n");
    let mut r_c_t = String::from("instance,family,T_C_ms,R_C\n");
    for rep in &reports {
        let fam = rep.family.as_deref().unwrap_or("");
        let spread = rep.embed_spread;
        let s = |f: fn(&Spread) -> f64| fmt_opt(spread.as_ref().map(f));
        t_embed.push_str(&format!(
            "{},{fam},{},{:.6},{},{},{},{}\n",
            rep.instance, rep.n_vertices, rep.t_embed_ms, s(|x| x.min), s(|x| x.max), s(|x| x.mean), s(|x| x.median)
        ));
        r_c_n.push_str(&format!("{},{fam},{},{}\n", rep.instance, rep.n_vertices, fmt_opt(rep.r_c)));
        r_c_t.push_str(&format!("{},{fam},{},{}\n", rep.instance, fmt_opt(rep.t_c_ms), fmt_opt(rep.r_c)));
    }
    let mut by_family: Vec<&DwmwisReport> = reports.iter().collect();
    by_family.sort_by(|a, b| a.family.cmp(&b.family).then(a.n_vertices.cmp(&b.n_vertices)).then(a.instance.cmp(&b.instance)));
    let mut r_c_f = String::from("family,n_vertices,instance,R_C\n");
    for rep in by_family {
        r_c_f.push_str(&format!("{},{},{},{}\n", rep.family.as_deref().unwrap_or(""), rep.n_vertices, rep.instance, fmt_opt(rep.r_c)));
    }
    write_file(&dir.join("plot_t_embed_vs_n.csv"), &t_embed)?;
    write_file(&dir.join("plot_r_c_vs_n.csv"), &r_c_n)?;
    write_file(&dir.join("plot_r_c_vs_t_c.csv"), &r_c_t)?;
    write_file(&dir.join("plot_r_c_by_family.csv"), &r_c_f)?;

    if with_ledgers {
        let ldir = dir.join("ledgers");
        fs::create_dir_all(&ldir).map_err(io_err(&ldir))?;
        let mut wall = String::from("instance,classical_ms,hybrid_ms,standard_ms\n");
        for r in &sorted {
            let path = ldir.join(format!("{}.json", r.instance));
            let text = serde_json::to_string_pretty(r).map_err(|source| HarnessError::Json { path: path.clone(), source })?;
            write_file(&path, &text)?;
            wall.push_str(&format!("{},{:.3},{:.3},{:.3}\n", r.instance, r.wall.classical_ms, r.wall.hybrid_ms, r.wall.standard_ms));
        }
        write_file(&dir.join("wall_clock.csv"), &wall)?;
    }
    Ok(summary)
}

/// Loads the JSON ledgers written by [`run_corpus`].
pub fn load_records(dir: &Path) -> Result<Vec<InstanceRecord>, HarnessError> {
    let ldir = dir.join("ledgers");
    let mut records = Vec::new();
    for entry in fs::read_dir(&ldir).map_err(io_err(&ldir))? {
        let path = entry.map_err(io_err(&ldir))?.path();
        if path.extension().is_some_and(|e| e == "json") {
            let text = fs::read_to_string(&path).map_err(io_err(&path))?;
            let record: InstanceRecord =
                serde_json::from_str(&text).map_err(|source| HarnessError::Json { path: path.clone(), source })?;
            records.push(record);
        }
    }
    records.sort_by_key(|r| r.order);
    Ok(records)
}

/// Re-aggregates the CSV reports from cached ledgers.
pub fn report_from_ledgers(dir: &Path) -> Result<CorpusSummary, HarnessError> {
    let records = load_records(dir)?;
    write_reports(dir, &records, false)
}
