use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_toral-relax"));
    c.env_remove("TORAL_RELAX_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SWEEP: &str = r#"{"schema": 1, "epsilon_grid": [0.2, 0.1, 0.05, 0.02], "N_rule": {"scaled": {"M_prime": 28}},
    "flavors": [{"flavor": "noisy", "side": "classical"}, {"flavor": "noisy", "side": "quantum"}]}"#;

fn strip_wall(csv: &str) -> String {
    csv.lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect::<Vec<_>>().join("\n")
}

#[test]
fn sweep_writes_csv_plot_and_cache() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SWEEP);
    let out1 = dir.path().join("a");
    let o = run(&["sweep", "--config", &cfg, "--out", out1.to_str().unwrap(), "--threads", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv1 = std::fs::read_to_string(out1.join("sweep.csv")).unwrap();
    assert!(csv1.starts_with("epsilon,N,theta_q,theta_p,flavor,side,tau,norm_lo,norm_hi,regime,wall_ms\n"));
    assert_eq!(csv1.lines().count(), 9);
    assert!(out1.join("sweep_plot.csv").exists());
    assert!(String::from_utf8_lossy(&o.stderr).contains("fit noisy/quantum/exact: slope"));

    // cache hit under a different thread count: byte-identical output
    let o = bin().args(["sweep", "--config", &cfg, "--out", out1.to_str().unwrap()]).env("TORAL_RELAX_THREADS", "4").output().unwrap();
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("cache hit"));
    assert_eq!(std::fs::read_to_string(out1.join("sweep.csv")).unwrap(), csv1);

    // forced recomputation with 4 threads: identical apart from the timing column
    let o = run(&["sweep", "--config", &cfg, "--out", out1.to_str().unwrap(), "--threads", "4", "--force"]);
    assert!(o.status.success());
    assert!(!String::from_utf8_lossy(&o.stderr).contains("cache hit"));
    let csv2 = std::fs::read_to_string(out1.join("sweep.csv")).unwrap();
    assert_eq!(strip_wall(&csv1), strip_wall(&csv2));
}

#[test]
fn json_output_carries_the_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SWEEP);
    let out = dir.path().join("j");
    let o = run(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap(), "--format", "json"]);
    assert!(o.status.success());
    let doc = toral_relax_cli::emit::read_json(&out.join("sweep.json")).unwrap();
    let c = toral_relax_cli::ExperimentConfig::from_json(SWEEP).unwrap();
    assert_eq!(doc.config_hash, c.content_hash());
    assert_eq!(doc.rows.len(), 8);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), r#"{"schema": 1, "epsilon_grid": [0.01, 0.1], "N_rule": {"fixed": 8}}"#);
    assert_eq!(run(&["sweep", "--config", &bad]).status.code(), Some(1));
    assert_eq!(run(&["sweep", "--config", "/nonexistent/config.json"]).status.code(), Some(1));
    assert_eq!(bin().args(["regimes"]).env("TORAL_RELAX_THREADS", "many").output().unwrap().status.code(), Some(1));
    let empty = write_config(dir.path(), r#"{"schema": 1, "epsilon_grid": [], "N_rule": {"fixed": 8}}"#);
    let out = dir.path().join("e");
    let o = run(&["sweep", "--config", &empty, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(out.join("sweep.csv")).unwrap().lines().count(), 1);
    // criterion 8 fails (second-order Egorov convergence), so a run including it exits 3
    assert_eq!(run(&["accept", "--only", "8"]).status.code(), Some(3));
    let o = run(&["accept", "--only", "4,10"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().filter(|l| l.starts_with("PASS")).count(), 2);
}

#[test]
fn table_subcommands() {
    let o = run(&["relax", "--epsilon", "0.1", "--N", "64"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = String::from_utf8(o.stdout).unwrap();
    assert_eq!(s.lines().count(), 5);
    assert!(s.lines().nth(1).unwrap().starts_with("0.1,64,"));

    let o = run(&["lattice-min", "--n-max", "6"]);
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 7);

    let o = run(&["noise-eig", "--epsilon", "0.5", "--N", "40", "--kmax", "1", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 9);

    let o = run(&["egorov", "--steps", "1", "--N-values", "16,32"]);
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 3);

    let o = run(&["regimes", "--N-values", "5,40,100000"]);
    let s = String::from_utf8(o.stdout).unwrap();
    assert!(s.contains("deeply_quantum") && s.contains("semiclassical"));
}
