use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hybrid_anneal::embedding::{find_embedding, EmbeddingCache};
use hybrid_anneal::graphs::{make_dwmwis_instance, parse_graph};
use hybrid_anneal::harness::{
    self, run_classical, run_corpus, run_hybrid, run_standard, ExperimentConfig, StandardMode,
};
use hybrid_anneal::metrics::aggregate;
use hybrid_anneal::seed::{self, tag};
use hybrid_anneal::{DwmwisInstance, GraphFamily};
use serde_json::json;
use tracing_subscriber::EnvFilter;

/// Hybrid annealing benchmark for dynamically weighted MWIS.
#[derive(Parser)]
#[command(name = "hybrid-anneal", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Experiment config (TOML).
    #[arg(long, global = true, default_value = "corpus/desk.toml")]
    config: PathBuf,
    /// Root seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the config and the environment.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Charge the single hybrid embedding once per assignment (standard mode).
    #[arg(long, global = true, conflicts_with = "re_embed")]
    charge_only: bool,
    /// Recompute the embedding for every assignment (standard mode).
    #[arg(long, global = true)]
    re_embed: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Hybrid,
    Standard,
    Classical,
}

#[derive(Subcommand)]
enum Command {
    /// Write the corpus instances (graphs and weight vectors).
    Gen,
    /// Embed one graph into the configured hardware and cache the result.
    Embed {
        #[command(flatten)]
        target: Target,
    },
    /// Solve one DWMWIS instance with one algorithm.
    Solve {
        #[command(flatten)]
        target: Target,
        #[arg(long, value_enum, default_value = "hybrid")]
        mode: Mode,
    },
    /// Run every algorithm over the whole corpus and write the reports.
    Bench,
    /// Rebuild the CSV reports from cached ledgers.
    Report {
        /// Directory holding `ledgers/`; defaults to the output directory.
        #[arg(long)]
        dir: Option<PathBuf>,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Target {
    /// Family instance such as C6, S4, K5, P3, G3x4, B2x3.
    #[arg(long)]
    family: Option<String>,
    /// Graph file in adjacency-list format.
    #[arg(long)]
    graph: Option<PathBuf>,
}

fn load_config(g: &Global) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&g.config).with_context(|| format!("loading {}", g.config.display()))?;
    cfg.apply_env();
    if let Some(out) = &g.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = g.seed {
        cfg.root_seed = seed;
    }
    if g.charge_only {
        cfg.standard_mode = StandardMode::ChargeOnly;
    }
    if g.re_embed {
        cfg.standard_mode = StandardMode::ReEmbed;
    }
    Ok(cfg)
}

fn instance_for(target: &Target, cfg: &ExperimentConfig) -> Result<DwmwisInstance> {
    if let Some(name) = &target.family {
        let family: GraphFamily = name.parse().with_context(|| format!("family {name:?}"))?;
        return Ok(cfg.instance(family)?);
    }
    let path = target.graph.as_ref().expect("clap enforces one target");
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let graph = parse_graph(&text)?;
    let probe = make_dwmwis_instance(&graph, 1, 0)?;
    Ok(make_dwmwis_instance(&graph, cfg.m, cfg.instance_seed(&probe.id))?)
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("json"));
}

fn cmd_gen(cfg: &ExperimentConfig) -> Result<()> {
    let dir = cfg.output_dir.join("instances");
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut manifest = String::from("instance,family,n_vertices,n_edges,m,seed\n");
    for inst in cfg.instances()? {
        fs::write(dir.join(format!("{}.graph", inst.id)), inst.graph.render())?;
        let weights: String = inst
            .weight_sets
            .iter()
            .map(|w| w.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(",") + "\n")
            .collect();
        fs::write(dir.join(format!("{}.weights", inst.id)), weights)?;
        manifest.push_str(&format!(
            "{},{},{},{},{},{}\n",
            inst.id,
            inst.family.map(|f| f.kind()).unwrap_or(""),
            inst.graph.n(),
            inst.graph.edges().len(),
            inst.m(),
            inst.seed
        ));
    }
    let path = cfg.output_dir.join("manifest.csv");
    fs::write(&path, &manifest)?;
    println!("{}", path.display());
    Ok(())
}

fn cmd_embed(cfg: &ExperimentConfig, target: &Target) -> Result<()> {
    let inst = instance_for(target, cfg)?;
    let hw = cfg.hardware.build()?;
    let embed_seed = seed::derive(cfg.instance_seed(&inst.id), tag::EMBED, 0);
    let cache = EmbeddingCache::new(cfg.output_dir.join("embeddings"));
    if let Some(e) = cache.load(&inst.graph, &hw, embed_seed) {
        print_json(&json!({
            "instance": inst.id,
            "cached": true,
            "path": cache.path_for(&inst.graph, &hw, embed_seed),
            "max_chain_len": e.max_chain_len(),
            "qubits_used": e.qubits().len(),
        }));
        return Ok(());
    }
    let (e, stats) = find_embedding(&inst.graph, &hw, embed_seed, &cfg.embed)?;
    let path = cache.store(&inst.graph, &hw, embed_seed, &e)?;
    print_json(&json!({
        "instance": inst.id,
        "cached": false,
        "path": path,
        "stats": stats,
        "t_embed_ms": stats.t_embed_ms(cfg.clock, &cfg.cost),
    }));
    Ok(())
}

fn cmd_solve(cfg: &ExperimentConfig, target: &Target, mode: Mode) -> Result<()> {
    let inst = instance_for(target, cfg)?;
    let classical = run_classical(&inst, cfg)?;
    if mode == Mode::Classical {
        print_json(&json!({ "instance": inst.id, "optima": classical.optima, "ledger": classical.ledger }));
        return Ok(());
    }
    let hw = cfg.hardware.build()?;
    let hybrid = run_hybrid(&inst, cfg, &hw, &classical)?;
    let run = match mode {
        Mode::Standard => run_standard(&inst, cfg, &hw, &classical, &hybrid)?,
        _ => hybrid,
    };
    let report = aggregate(&run.ledger)?;
    print_json(&json!({
        "instance": inst.id,
        "solutions": run.solutions,
        "ledger": run.ledger,
        "T_H_ms": report.t_h_ms,
        "T_std_ms": report.t_std_ms,
        "T_C_ms": report.t_c_ms,
        "R_C": report.r_c,
    }));
    Ok(())
}

fn cmd_bench(cfg: &ExperimentConfig) -> Result<bool> {
    let (summary, _) = run_corpus(cfg)?;
    print_json(&serde_json::to_value(&summary)?);
    Ok(!summary.has_hard_failure())
}

fn cmd_report(cfg: &ExperimentConfig, dir: Option<&Path>) -> Result<()> {
    let dir = dir.unwrap_or(&cfg.output_dir);
    let summary = harness::report_from_ledgers(dir)?;
    if summary.instances == 0 {
        bail!("no ledgers under {}", dir.join("ledgers").display());
    }
    print_json(&serde_json::to_value(&summary)?);
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = load_config(&cli.global).and_then(|cfg| match &cli.command {
        Command::Gen => cmd_gen(&cfg).map(|_| true),
        Command::Embed { target } => cmd_embed(&cfg, target).map(|_| true),
        Command::Solve { target, mode } => cmd_solve(&cfg, target, *mode).map(|_| true),
        Command::Bench => cmd_bench(&cfg),
        Command::Report { dir } => cmd_report(&cfg, dir.as_deref()).map(|_| true),
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
