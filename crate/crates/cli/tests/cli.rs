//! End-to-end tests driving the compiled binary: exit codes, report
//! envelopes, artifact determinism, and the tile-dump reuse between
//! subcommands.
//!
//! Grid resolutions stay small here (48 or 64 cells per axis); the
//! numerical depth lives in the library tests, this file checks the
//! process contract.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn heis(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heis"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn read_report(dir: &Path, name: &str) -> Value {
    let raw = fs::read(dir.join(name)).expect("report exists");
    serde_json::from_slice(&raw).expect("report is json")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body).expect("config written");
    path.to_str().expect("utf8 path").to_owned()
}

// small grid, fewer samples, and the coarse-grid two-scale allowance
const FAST: &str = r#"{
    "grid": {"resolution": 48},
    "group": {"checks": 5000},
    "dist": {"pairs": 120},
    "iso": {"samples": 60},
    "mra": {"tolerances": {"refinement": 0.08}}
}"#;

#[test]
fn usage_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path();
    assert_eq!(code(&heis(&["frobnicate"], out)), 2);
    assert_eq!(code(&heis(&[], out)), 2);
    assert_eq!(code(&heis(&["dist", "pair", "--p", "0,0", "--q", "1,0,0"], out)), 2);
    assert_eq!(code(&heis(&["--res", "16", "group", "check"], out)), 2);
    assert_eq!(code(&heis(&["--res", "1024", "group", "check"], out)), 2);
    assert_eq!(code(&heis(&["--t", "0.3", "group", "check"], out)), 2);
}

#[test]
fn config_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path();
    let garbled = write_config(out, "{nope");
    let run = heis(&["--config", &garbled, "group", "check"], out);
    assert_eq!(code(&run), 2);
    assert!(String::from_utf8_lossy(&run.stderr).contains("malformed config"));

    let unknown = write_config(out, r#"{"tile": {"self_similarity_maximum": 0.1}}"#);
    assert_eq!(code(&heis(&["--config", &unknown, "group", "check"], out)), 2);

    let invalid = write_config(out, r#"{"group": {"tol": -1.0}}"#);
    assert_eq!(code(&heis(&["--config", &invalid, "group", "check"], out)), 2);

    assert_eq!(code(&heis(&["--config", "/nonexistent/cfg.json", "group", "check"], out)), 2);
}

#[test]
fn group_check_report_envelope() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path();
    let cfg = write_config(out, r#"{"group": {"checks": 5000}}"#);
    let run = heis(&["--config", &cfg, "--seed", "3", "group", "check"], out);
    assert_eq!(code(&run), 0);
    let rep = read_report(out, "group_check.json");
    assert_eq!(rep["tool"], "heis");
    assert_eq!(rep["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(rep["command"], "group check");
    assert_eq!(rep["passed"], true);
    let hash = rep["config_sha256"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    assert!(hash.chars().all(|c| c.is_ascii_hexdigit()));
    // the embedded configuration reflects the flag overrides
    assert_eq!(rep["config"]["seed"], 3);
    assert_eq!(rep["config"]["group"]["checks"], 5000);
    assert!(rep["gates"].as_array().unwrap().iter().all(|g| g["passed"] == true));
}

#[test]
fn dist_pair_unit_horizontal_step() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path();
    let run = heis(&["dist", "pair", "--p", "0,0,0", "--q", "1,0,0"], out);
    assert_eq!(code(&run), 0);
    let rep = read_report(out, "dist_pair.json");
    let d = rep["findings"]["distance"].as_f64().unwrap();
    assert!((d - 1.0).abs() < 1e-4, "d(0, e_x) = {d}");
}

#[test]
fn artifacts_are_deterministic_across_thread_counts() {
    let tmp_a = TempDir::new().unwrap();
    let tmp_b = TempDir::new().unwrap();
    let cfg_a = write_config(tmp_a.path(), FAST);
    let cfg_b = write_config(tmp_b.path(), FAST);

    let base_a = ["--config", cfg_a.as_str(), "--seed", "9", "--threads", "1"];
    let base_b = ["--config", cfg_b.as_str(), "--seed", "9", "--threads", "3"];
    for (base, out) in [(&base_a, tmp_a.path()), (&base_b, tmp_b.path())] {
        let mut args = base.to_vec();
        args.extend(["tile", "build"]);
        assert_eq!(code(&heis(&args, out)), 0);
        let mut args = base.to_vec();
        args.extend(["mra", "project"]);
        assert_eq!(code(&heis(&args, out)), 0);
        let mut args = base.to_vec();
        args.extend(["dist", "estimate"]);
        assert_eq!(code(&heis(&args, out)), 0);
    }

    for name in ["tile.voxels", "mra_coefficients.csv", "distance_pairs.csv"] {
        let a = fs::read(tmp_a.path().join(name)).unwrap();
        let b = fs::read(tmp_b.path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");
    }

    let coeffs = fs::read_to_string(tmp_a.path().join("mra_coefficients.csv")).unwrap();
    assert!(coeffs.starts_with("level,gamma_m,gamma_n,gamma_k,coefficient\n"));
    assert!(coeffs.lines().count() > 1);
}

#[test]
fn failing_gate_exits_1_and_reports_failure() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path();
    let cfg = write_config(
        out,
        r#"{"grid": {"resolution": 48}, "tile": {"self_similarity_max": 1e-6}}"#,
    );
    let run = heis(&["--config", &cfg, "tile", "verify"], out);
    assert_eq!(code(&run), 1);
    let rep = read_report(out, "tile_verify.json");
    assert_eq!(rep["passed"], false);
    let gates = rep["gates"].as_array().unwrap();
    assert!(gates.iter().any(|g| g["passed"] == false));
}

#[test]
fn mra_verify_reuses_the_built_tile() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path();
    let cfg = write_config(
        out,
        r#"{"grid": {"resolution": 64}, "mra": {"tolerances": {"refinement": 0.06}}}"#,
    );
    assert_eq!(code(&heis(&["--config", &cfg, "tile", "build"], out)), 0);
    let dump = fs::read(out.join("tile.voxels")).unwrap();

    let run = heis(&["--config", &cfg, "mra", "verify"], out);
    assert_eq!(code(&run), 0);
    // reuse path: no rebuild note and the dump is untouched
    assert!(!String::from_utf8_lossy(&run.stderr).contains("rebuilding"));
    assert_eq!(dump, fs::read(out.join("tile.voxels")).unwrap());
    let rep = read_report(out, "mra_verify.json");
    assert_eq!(rep["findings"]["verdict"], true);

    // a resolution change invalidates the dump and triggers a rebuild
    let run = heis(&["--config", &cfg, "--res", "48", "mra", "project"], out);
    assert_eq!(code(&run), 0);
    assert!(String::from_utf8_lossy(&run.stderr).contains("rebuilding"));
}

#[test]
fn dirichlet_verify_passes_on_coarse_grid() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path();
    let run = heis(&["--res", "64", "dirichlet", "verify"], out);
    assert_eq!(code(&run), 0);
    let rep = read_report(out, "dirichlet_verify.json");
    let covering = rep["findings"]["fundamental_set"]["covering_fraction"].as_f64().unwrap();
    assert!(covering > 0.97, "covering {covering}");
    assert!(out.join("dirichlet_cell.voxels").exists());
}

#[test]
fn pipeline_runs_every_stage() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path();
    let cfg = write_config(out, FAST);
    let run = heis(&["--config", &cfg, "all"], out);
    assert_eq!(code(&run), 0);
    let rep = read_report(out, "all.json");
    assert_eq!(rep["passed"], true);
    let stages = rep["findings"]["stages"].as_array().unwrap();
    assert_eq!(stages.len(), 9);
    for stage in stages {
        assert_eq!(stage["passed"], true, "stage {}", stage["stage"]);
        let per_stage = stage["report"].as_str().unwrap();
        assert!(out.join(per_stage).exists(), "missing {per_stage}");
    }
}
