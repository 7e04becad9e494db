//! End-to-end runs of the `nehari` binary.

use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;

const MODEL: &str = r#"{
  "phi": {"kind": "power", "p": 2.0},
  "f": {"kind": "power", "q": 4.0},
  "domain": {"kind": "interval", "a": 0.0, "b": 1.0, "n": 128},
  "seed": 3,
  "samples": {"fields": 20, "floor_samples": 20, "grid_samples": 50}
}"#;

fn with(base: &str, key: &str, value: Value) -> String {
    let mut v: Value = serde_json::from_str(base).unwrap();
    v[key] = value;
    v.to_string()
}

fn run(cmd: &str, config: &str, dir: &Path) -> i32 {
    let path = dir.join("config.json");
    fs::write(&path, config).unwrap();
    let out = dir.join("out");
    Command::new(env!("CARGO_BIN_EXE_nehari"))
        .args([cmd, path.to_str().unwrap(), "--output-dir", out.to_str().unwrap()])
        .env("NEHARI_THREADS", "2")
        .status()
        .unwrap()
        .code()
        .unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn solve_writes_summary_and_solution() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("solve", MODEL, dir.path()), 0);
    let s = json(&dir.path().join("out/summary.json"));
    assert_eq!(s["mode"], "ground");
    assert_eq!(s["converged"], true);
    let level = s["level"].as_f64().unwrap();
    // The projected sine is a competitor on the Nehari set.
    let sine_level = std::f64::consts::PI.powi(4) / 6.0;
    assert!(level < sine_level && level > 0.9 * sine_level, "{level}");
    assert!((s["lambda1"].as_f64().unwrap() - 9.8696).abs() < 0.1);
    assert_eq!(s["nodal_domains"], 1);
    let csv = fs::read_to_string(dir.path().join("out/solution.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x,u"));
    assert_eq!(lines.count(), 129);
}

#[test]
fn malformed_config_exits_one_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("solve", "{\"phi\": ", dir.path()), 1);
    assert!(!dir.path().join("out").exists());
    assert_eq!(run("solve", &with(MODEL, "bogus", Value::Bool(true)), dir.path()), 1);
    assert!(!dir.path().join("out").exists());
}

#[test]
fn iteration_cap_exits_two_with_unconverged_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with(MODEL, "solve", serde_json::json!({"mode": "nodal", "max_iters": 1}));
    assert_eq!(run("solve", &cfg, dir.path()), 2);
    assert_eq!(json(&dir.path().join("out/summary.json"))["converged"], false);
}

#[test]
fn linear_nonlinearity_fails_named_checks() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with(MODEL, "f", serde_json::json!({"kind": "power", "q": 2.0}));
    assert_eq!(run("check", &cfg, dir.path()), 3);
    let reports = json(&dir.path().join("out/checks.json"));
    let failed: Vec<&str> = reports
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["passed"] == false)
        .map(|r| r["check_id"].as_str().unwrap())
        .collect();
    assert!(failed.contains(&"f3"), "{failed:?}");
    assert!(failed.contains(&"fibering"), "{failed:?}");
}

#[test]
fn check_subset_contains_only_requested_entries() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with(MODEL, "checks", serde_json::json!(["convexity"]));
    assert_eq!(run("check", &cfg, dir.path()), 0);
    let reports = json(&dir.path().join("out/checks.json"));
    let ids: Vec<&str> = reports.as_array().unwrap().iter().map(|r| r["check_id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["convexity"]);
    for key in ["check_id", "passed", "tolerance", "samples", "worst_witness"] {
        assert!(reports[0].get(key).is_some(), "missing {key}");
    }
}

#[test]
fn eigen_on_square_is_near_two_pi_squared() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with(
        MODEL,
        "domain",
        serde_json::json!({"kind": "rectangle", "ax": 0.0, "bx": 1.0, "ay": 0.0, "by": 1.0, "nx": 32, "ny": 32}),
    );
    assert_eq!(run("eigen", &cfg, dir.path()), 0);
    let e = json(&dir.path().join("out/eigen.json"));
    let lambda = e["lambda1"].as_f64().unwrap();
    let target = 2.0 * std::f64::consts::PI.powi(2);
    assert!((lambda - target).abs() / target < 0.02, "{lambda}");
    let csv = fs::read_to_string(dir.path().join("out/eigenfield.csv")).unwrap();
    assert!(csv.starts_with("x,y,u\n"));
}

#[test]
fn sweep_marks_failed_rows_and_keeps_order() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with(MODEL, "sweep", serde_json::json!({"parameter": "f.q", "values": [3.0, 2.0, 5.0]}));
    assert_eq!(run("sweep", &cfg, dir.path()), 0);
    let csv = fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows.iter().map(|r| r[0]).collect::<Vec<_>>(), ["3.0", "2.0", "5.0"]);
    assert!(rows[1][1..].iter().all(|c| *c == "NaN"));
    for r in [&rows[0], &rows[2]] {
        let levels: Vec<f64> = r[1..5].iter().map(|c| c.parse().unwrap()).collect();
        assert!(levels.iter().all(|l| *l > 0.0));
    }
}

#[test]
fn empty_sweep_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with(MODEL, "sweep", serde_json::json!({"parameter": "f.q", "values": []}));
    assert_eq!(run("sweep", &cfg, dir.path()), 1);
}

#[test]
fn solve_outputs_are_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = with(MODEL, "solve", serde_json::json!({"mode": "nodal", "initial": {"kind": "random"}}));
    let (ca, cb) = (run("solve", &cfg, a.path()), run("solve", &cfg, b.path()));
    assert_eq!(ca, cb);
    for f in ["summary.json", "solution.csv"] {
        assert_eq!(fs::read(a.path().join("out").join(f)).unwrap(), fs::read(b.path().join("out").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn provided_initial_field_is_read_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("solve", MODEL, dir.path()), 0);
    let seed = dir.path().join("seed.csv");
    fs::copy(dir.path().join("out/solution.csv"), &seed).unwrap();
    let cfg = with(
        MODEL,
        "solve",
        serde_json::json!({"initial": {"kind": "provided", "path": seed.to_str().unwrap()}}),
    );
    assert_eq!(run("solve", &cfg, dir.path()), 0);
    assert!(json(&dir.path().join("out/summary.json"))["iterations"].as_u64().unwrap() <= 1);
}
