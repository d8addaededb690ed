//! End-to-end checks of the knobtune binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SPACE: &str = r#"{
  "workload": "toy",
  "knobs": [
    {"name": "x", "values": [1, 2]},
    {"name": "y", "values": [1, 2, 3]}
  ]
}"#;

const GRID: &str = r#"{
  "workload": "grid",
  "knobs": [
    {"name": "a", "values": [1, 2, 4, 8, 16, 32]},
    {"name": "b", "values": [1, 2, 4, 8, 16, 32]},
    {"name": "c", "values": [1, 2, 4, 8, 16, 32]}
  ],
  "validity_rule": "a * b <= 256"
}"#;

const QUICK: &str = r#"{
  "iterations": 3,
  "total_budget": 150,
  "sa": {"num_chains": 16, "max_steps": 30},
  "ppo": {"episodes_per_iteration": 8, "max_episode_steps": 10, "hidden_dim": 16, "head_hidden_dim": 8}
}"#;

fn knobtune(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_knobtune"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn s(p: &PathBuf) -> &str {
    p.to_str().unwrap()
}

/// Grid space plus a synthetic backend produced by the landscape command.
fn grid_setup() -> (TempDir, String, String, String) {
    let dir = TempDir::new().unwrap();
    let space = write(dir.path(), "space.json", GRID);
    let params = write(dir.path(), "params.json", QUICK);
    let backend = dir.path().join("backend.json");
    let out = knobtune(&["landscape", "--space", &space, "--out", s(&backend), "--seed", "9"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    (dir, space, s(&backend).to_string(), params)
}

#[test]
fn tune_writes_trace_and_summary() {
    let (dir, space, backend, params) = grid_setup();
    let out_dir = dir.path().join("run");
    let out = knobtune(&[
        "tune", "--space", &space, "--backend", &backend, "--params", &params, "--mode", "AE_AS", "--out",
        s(&out_dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(
        lines.next().unwrap(),
        "iteration,cum_measurements,cum_cost,best_fitness,best_config_id,explore_steps"
    );
    assert_eq!(lines.count(), 3);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["mode"], "AE_AS");
    assert!(summary["best_fitness"].as_f64().unwrap() > 0.0);
    let echoed: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("params.json")).unwrap()).unwrap();
    assert_eq!(echoed["total_budget"], 150);
}

#[test]
fn tune_is_deterministic_across_processes() {
    let (dir, space, backend, params) = grid_setup();
    let mut traces = Vec::new();
    for name in ["one", "two"] {
        let out_dir = dir.path().join(name);
        let out = knobtune(&[
            "tune", "--space", &space, "--backend", &backend, "--params", &params, "--mode", "sa", "--seed", "4",
            "--out", s(&out_dir),
        ]);
        assert!(out.status.success());
        traces.push(fs::read(out_dir.join("trace.csv")).unwrap());
    }
    assert_eq!(traces[0], traces[1]);
}

#[test]
fn configuration_errors_exit_with_three() {
    let (dir, space, backend, _) = grid_setup();
    let missing = dir.path().join("nope.json");
    let out = knobtune(&["tune", "--space", s(&missing), "--backend", &backend]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!out.stderr.is_empty());

    let bad_params = write(dir.path(), "bad.json", r#"{"no_such_field": 1}"#);
    let out = knobtune(&["tune", "--space", &space, "--backend", &backend, "--params", &bad_params]);
    assert_eq!(out.status.code(), Some(3));

    let bad_rule = write(dir.path(), "rule.json", &GRID.replace("a * b <= 256", "a * z <= 256"));
    let out = knobtune(&["tune", "--space", &bad_rule, "--backend", &backend]);
    assert_eq!(out.status.code(), Some(3));

    let out = knobtune(&["tune", "--space", &space, "--backend", &backend, "--budget", "10"]);
    assert_eq!(out.status.code(), Some(3), "budget below one batch is rejected");
}

#[test]
fn unavailable_external_backend_exits_with_four() {
    let dir = TempDir::new().unwrap();
    let space = write(dir.path(), "space.json", SPACE);
    let backend = write(
        dir.path(),
        "backend.json",
        r#"{"kind": "external", "command": ["/definitely/not/a/binary"]}"#,
    );
    let out = knobtune(&["brute-force", "--space", &space, "--backend", &backend, "--out", "unused.csv"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(knobtune(&[]).status.code(), Some(2));
    assert_eq!(knobtune(&["tune"]).status.code(), Some(2));
    let (dir, space, backend, _) = grid_setup();
    let out_csv = dir.path().join("c.csv");
    let out = knobtune(&["compare", "--space", &space, "--backend", &backend, "--modes", "", "--seeds", "1", "--out", s(&out_csv)]);
    assert_eq!(out.status.code(), Some(2));
    let out = knobtune(&["tune", "--space", &space, "--backend", &backend, "--mode", "GA"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn brute_force_writes_full_table_and_argmax() {
    let dir = TempDir::new().unwrap();
    let space = write(dir.path(), "space.json", SPACE);
    write(dir.path(), "table.csv", "id,fitness\n0,0.3\n1,0.9\n2,0.1\n3,0.7\n4,0.5\n5,0.2\n");
    let backend = write(dir.path(), "backend.json", r#"{"kind": "tabular", "path": "table.csv"}"#);
    let table = dir.path().join("out.csv");
    let out = knobtune(&["brute-force", "--space", &space, "--backend", &backend, "--out", s(&table)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&table).unwrap();
    assert_eq!(text.lines().count(), 7);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["argmax_id"], 1);
    assert_eq!(report["max_fitness"], 0.9);
    assert_eq!(report["knobs"]["x"], 1);
    assert_eq!(report["knobs"]["y"], 2);
}

#[test]
fn brute_force_refuses_spaces_above_cap() {
    let (dir, space, backend, _) = grid_setup();
    let table = dir.path().join("big.csv");
    let out = knobtune(&["brute-force", "--space", &space, "--backend", &backend, "--out", s(&table), "--cap", "100"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!table.exists());
}

#[test]
fn landscape_is_idempotent_and_loadable() {
    let (dir, space, backend, _) = grid_setup();
    let again = dir.path().join("again.json");
    let out = knobtune(&["landscape", "--space", &space, "--out", s(&again), "--seed", "9"]);
    assert!(out.status.success());
    assert_eq!(fs::read(&backend).unwrap(), fs::read(&again).unwrap());

    let spec: serde_json::Value = serde_json::from_slice(&fs::read(&backend).unwrap()).unwrap();
    assert_eq!(spec["kind"], "synthetic");
    assert_eq!(spec["landscape"]["seed"], 9);

    let invalid = dir.path().join("invalid.json");
    let out = knobtune(&["landscape", "--space", &space, "--out", s(&invalid), "--invalid-rule", "q > 1"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn compare_writes_one_row_per_mode() {
    let (dir, space, backend, params) = grid_setup();
    let table = dir.path().join("compare.csv");
    let out = knobtune(&[
        "compare", "--space", &space, "--backend", &backend, "--params", &params, "--modes", "SA,AE_AS", "--seeds",
        "1,2", "--out", s(&table),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&table).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("mode,"));
    assert!(lines[1].starts_with("SA,2,"));
    assert!(lines[2].starts_with("AE_AS,2,"));
}

#[test]
fn print_defaults_round_trips_as_params_file() {
    let out = knobtune(&["--print-defaults"]);
    assert!(out.status.success());
    let defaults: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(defaults["mode"], "AE_AS");
    assert_eq!(defaults["total_budget"], 1000);
    assert_eq!(defaults["sampling"]["greedy_batch"], 64);

    let (dir, space, backend, _) = grid_setup();
    let mut edited = defaults.clone();
    edited["iterations"] = 2.into();
    edited["total_budget"] = 128.into();
    edited["mode"] = "SA".into();
    let params = write(dir.path(), "defaults.json", &edited.to_string());
    let out_dir = dir.path().join("d");
    let out = knobtune(&["tune", "--space", &space, "--backend", &backend, "--params", &params, "--out", s(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
