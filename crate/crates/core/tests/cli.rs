use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_distdetect"))
}

fn preset(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

const SMALL: &str = r#"{
  "name": "small",
  "model": { "true_state": 0, "agents": [
    [[0.8, 0.2], [0.2, 0.8]],
    [[0.5, 0.5], [0.5, 0.5]],
    [[0.7, 0.3], [0.4, 0.6]]
  ]},
  "network": { "kind": "gossip", "n": 3, "edges": [[0, 1], [1, 2], [2, 0]] },
  "horizon": 40,
  "delta": 0.1,
  "trials": 2,
  "seed": 3
}"#;

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("scenario.json");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn simulate_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("out");
    let out = run(&[
        "simulate",
        cfg.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--trials",
        "3",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let csv = std::fs::read_to_string(out_dir.join("trajectories.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "trial,t,agent,tv_error,log_tv_error,kl_increment,centralized_tv_error"
    );
    assert_eq!(lines.count(), 3 * 40 * 3);

    let summary = read_json(&out_dir.join("summary.json"));
    assert_eq!(summary["trials"], 3);
    assert_eq!(summary["per_trial"].as_array().unwrap().len(), 3);
    let digest = summary["config_digest"].as_str().unwrap();
    assert_eq!(digest.len(), 64);
    assert!(String::from_utf8_lossy(&out.stdout).contains(digest));
}

#[test]
fn seed_override_changes_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let mut csvs = Vec::new();
    for (sub, seed) in [("a", "3"), ("b", "3"), ("c", "4")] {
        let out_dir = dir.path().join(sub);
        let out = run(&[
            "simulate",
            cfg.to_str().unwrap(),
            "--seed",
            seed,
            "--out-dir",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        csvs.push(std::fs::read(out_dir.join("trajectories.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
    assert_ne!(csvs[0], csvs[2]);
}

#[test]
fn verify_prop1_on_reference_preset() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "verify",
        preset("reference_prop1.json").to_str().unwrap(),
        "--which",
        "prop1",
        "--trials",
        "100",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.path().join("verify_prop1.json"));
    assert_eq!(report["passed"], true);
    assert_eq!(report["trials"], 100);
    assert_eq!(report["reports"][0]["checkpoint"], 300);
    assert_eq!(report["reports"][0]["trial_statistics"].as_array().unwrap().len(), 100);
}

#[test]
fn theorem1_requires_fixed_network() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = run(&[
        "verify",
        cfg.to_str().unwrap(),
        "--which",
        "theorem1",
        "--trials",
        "100",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("fixed"));
}

#[test]
fn invalid_configs_exit_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let unidentifiable = SMALL
        .replace("[[0.8, 0.2], [0.2, 0.8]]", "[[0.5, 0.5], [0.5, 0.5]]")
        .replace("[[0.7, 0.3], [0.4, 0.6]]", "[[0.5, 0.5], [0.5, 0.5]]");
    let cfg = write_config(dir.path(), &unidentifiable);
    let out = run(&["simulate", cfg.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("global identifiability"));

    let cfg = write_config(dir.path(), "{ not json");
    let out = run(&["simulate", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["verify", preset("reference_prop1.json").to_str().unwrap(), "--which", "bogus"]);
    assert!(!out.status.success());
}

#[test]
fn spectral_reports_gap_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "spectral",
        preset("connection_identity.json").to_str().unwrap(),
        "--t",
        "1,10,1000",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let report = read_json(&dir.path().join("spectral.json"));
    assert_eq!(report["connected"], true);
    // Gossip on a 6-cycle: E[W] = I − L/12, so σ₂ = 1 − (2 − 2cos(π/3))/12.
    let s2 = report["sigma2"].as_f64().unwrap();
    assert!((s2 - (1.0 - 1.0 / 12.0)).abs() < 1e-9, "{s2}");
    assert_eq!(report["deviation"].as_array().unwrap().len(), 3);
    assert_eq!(report["within_bound"], true);
}
