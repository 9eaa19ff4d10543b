use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_hybrid-anneal");

fn write_config(dir: &Path, corpus: &str) -> std::path::PathBuf {
    let path = dir.join("cfg.toml");
    let text = format!(
        r#"
root_seed = 11
m = 3
reads = 100
embed_repeats = 2
output_dir = "{}"
{corpus}
[hardware]
k = 4
inactive_count = 3
"#,
        dir.join("out").display()
    );
    fs::write(&path, text).unwrap();
    path
}

const SMALL: &str = r#"
[[corpus]]
family = "cycle"
sizes = "4..=5"
[[corpus]]
family = "star"
sizes = "3"
"#;

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("HYBRID_ANNEAL_OUTPUT_DIR").output().unwrap()
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn bench_then_report_reproduces_corpus_csv() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let summary = stdout_json(&run(&["--config", cfg.to_str().unwrap(), "bench"]));
    assert_eq!(summary["done"], 3);
    assert_eq!(summary["failed"], 0);

    let out = tmp.path().join("out");
    let corpus = fs::read_to_string(out.join("corpus.csv")).unwrap();
    let mut lines = corpus.lines();
    assert_eq!(lines.next(), Some("instance,family,n_vertices,m,t_embed_ms,T_H_ms,T_std_ms,T_C_ms,R_C,unsolved_count"));
    let ids: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ids, ["C4", "C5", "S3"]);
    for name in ["detail.csv", "skipped.csv", "plot_t_embed_vs_n.csv", "plot_r_c_by_family.csv", "config.toml", "ledgers/C4.json"] {
        assert!(out.join(name).exists(), "{name}");
    }

    fs::remove_file(out.join("corpus.csv")).unwrap();
    let again = stdout_json(&run(&["--config", cfg.to_str().unwrap(), "report"]));
    assert_eq!(again["done"], 3);
    assert_eq!(fs::read_to_string(out.join("corpus.csv")).unwrap(), corpus);
}

#[test]
fn solve_each_mode() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let cfg = cfg.to_str().unwrap();

    let classical = stdout_json(&run(&["--config", cfg, "solve", "--family", "C5", "--mode", "classical"]));
    assert_eq!(classical["optima"].as_array().unwrap().len(), 3);

    let hybrid = stdout_json(&run(&["--config", cfg, "solve", "--family", "C5"]));
    let charged = stdout_json(&run(&["--config", cfg, "--charge-only", "solve", "--family", "C5", "--mode", "standard"]));
    let re_embedded = stdout_json(&run(&["--config", cfg, "--re-embed", "solve", "--family", "C5", "--mode", "standard"]));
    assert_eq!(hybrid["ledger"]["embed_calls"], 1);
    assert_eq!(charged["ledger"]["embed_calls"], 1);
    assert_eq!(re_embedded["ledger"]["embed_calls"], 3);
    for sol in hybrid["solutions"].as_array().unwrap() {
        assert_eq!(sol["optimal"], true);
    }
    assert_eq!(charged["solutions"], hybrid["solutions"]);
    assert!(charged["T_std_ms"].as_f64().unwrap() > hybrid["T_H_ms"].as_f64().unwrap());
    assert!(re_embedded["T_std_ms"].as_f64().unwrap() > re_embedded["T_H_ms"].as_f64().unwrap());
}

#[test]
fn solve_from_graph_file() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let graph = tmp.path().join("tri.graph");
    fs::write(&graph, "n 3\nw 0 1\nw 1 1\nw 2 1\n0: 1 2\n1: 2\n").unwrap();
    let out = stdout_json(&run(&["--config", cfg.to_str().unwrap(), "solve", "--graph", graph.to_str().unwrap(), "--mode", "classical"]));
    assert_eq!(out["optima"].as_array().unwrap().len(), 3);
}

#[test]
fn embed_uses_cache_on_second_call() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let cfg = cfg.to_str().unwrap();
    let first = stdout_json(&run(&["--config", cfg, "embed", "--family", "K4"]));
    let second = stdout_json(&run(&["--config", cfg, "embed", "--family", "K4"]));
    assert_eq!(first["cached"], false);
    assert_eq!(second["cached"], true);
    assert_eq!(first["path"], second["path"]);
}

#[test]
fn gen_writes_manifest_and_instances() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = run(&["--config", cfg.to_str().unwrap(), "gen"]);
    assert!(out.status.success());
    let manifest = fs::read_to_string(tmp.path().join("out/manifest.csv")).unwrap();
    assert_eq!(manifest.lines().count(), 4);
    let weights = fs::read_to_string(tmp.path().join("out/instances/S3.weights")).unwrap();
    assert_eq!(weights.lines().count(), 3);
    assert!(weights.lines().all(|l| l.split(',').count() == 4));
}

#[test]
fn output_dir_from_env_and_flag() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let env_dir = tmp.path().join("from-env");
    let out = Command::new(BIN)
        .args(["--config", cfg.to_str().unwrap(), "gen"])
        .env("HYBRID_ANNEAL_OUTPUT_DIR", &env_dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(env_dir.join("manifest.csv").exists());

    let flag_dir = tmp.path().join("from-flag");
    let out = Command::new(BIN)
        .args(["--config", cfg.to_str().unwrap(), "--out", flag_dir.to_str().unwrap(), "gen"])
        .env("HYBRID_ANNEAL_OUTPUT_DIR", &env_dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(flag_dir.join("manifest.csv").exists());
}

#[test]
fn seed_flag_changes_weights() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let cfg = cfg.to_str().unwrap();
    let a = stdout_json(&run(&["--config", cfg, "solve", "--family", "C5", "--mode", "classical"]));
    let b = stdout_json(&run(&["--config", cfg, "--seed", "12", "solve", "--family", "C5", "--mode", "classical"]));
    assert_ne!(a["optima"], b["optima"]);
}

#[test]
fn unembeddable_instance_is_skipped_not_fatal() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"
[[corpus]]
family = "complete"
sizes = "3,40"
"#,
    );
    let out = run(&["--config", cfg.to_str().unwrap(), "bench"]);
    let summary = stdout_json(&out);
    assert_eq!(summary["skipped"], 1);
    let skipped = fs::read_to_string(tmp.path().join("out/skipped.csv")).unwrap();
    assert!(skipped.lines().nth(1).unwrap().starts_with("K40,complete,40,skipped,"));
}

#[test]
fn bad_invocations_exit_nonzero() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let cfg = cfg.to_str().unwrap();
    assert!(!run(&["--config", "/nonexistent.toml", "gen"]).status.success());
    assert!(!run(&["--config", cfg, "--charge-only", "--re-embed", "bench"]).status.success());
    assert!(!run(&["--config", cfg, "solve", "--family", "Q3"]).status.success());
    assert!(!run(&["--config", cfg, "solve"]).status.success());
}
