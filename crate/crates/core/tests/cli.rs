//! End-to-end runs of the command-line front end.

use std::fs;

use cvtele::cli::{run, EXIT_CONFIG, EXIT_FAILURE, EXIT_OK};
use serde_json::Value;

fn cvtele(args: &[&str]) -> u8 {
    run(std::iter::once("cvtele").chain(args.iter().copied()))
}

fn manifest(dir: &std::path::Path, name: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(format!("{name}.manifest.json"))).unwrap()).unwrap()
}

#[test]
fn kernel_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(cvtele(&["kernel", "--r", "0.5", "--out-dir", out]), EXIT_OK);
    let m = manifest(dir.path(), "kernel");
    assert!(m["results"]["max_abs_error"].as_f64().unwrap() < 1e-8);
    assert_eq!(m["config"]["n_max"], 40);
    assert!(m["defaults"]["leakage_bound"].is_number());
    let csv = fs::read_to_string(dir.path().join("kernel.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "x,p,P,closed_form");
    assert_eq!(csv.lines().count(), 1 + 121 * 121);
}

#[test]
fn teleport_vacuum_with_gaussian_kernel_is_thermal() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(cvtele(&["teleport", "--nbar", "0.3", "--n-max", "30", "--out-dir", out]), EXIT_OK);
    let m = manifest(dir.path(), "teleport");
    assert!(m["results"]["trace_distance_to_thermal"].as_f64().unwrap() < 1e-3);
    assert!((m["results"]["fidelity_channel"].as_f64().unwrap() - 1.0 / 1.3).abs() < 1e-3);
}

#[test]
fn teleport_resource_compares_oracle_and_channel() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let args = ["teleport", "--r", "0.5", "--input", "coherent:0.5,0.2", "--n-max", "20", "--resolution", "61", "--out-dir", out];
    assert_eq!(cvtele(&args), EXIT_OK);
    let m = manifest(dir.path(), "teleport");
    assert!(m["results"]["trace_distance_oracle_channel"].as_f64().unwrap() < 1e-3);
    assert!(dir.path().join("teleport_outcomes.csv").exists());
}

#[test]
fn config_file_takes_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"r": [0.5], "samples": 2000, "seed": 4, "T": 0.8}"#).unwrap();
    let out = dir.path().to_str().unwrap();
    let code = cvtele(&["densecode", "--r", "1.0", "--seed", "1", "--config", cfg.to_str().unwrap(), "--out-dir", out]);
    assert_eq!(code, EXIT_OK);
    let m = manifest(dir.path(), "densecode");
    assert_eq!(m["config"]["seed"], 4);
    assert_eq!(m["config"]["transmission"], 0.8);
    let csv = fs::read_to_string(dir.path().join("densecode.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("0.5,0.8,"));
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(cvtele(&["densecode", "--out-dir", out]), EXIT_CONFIG);
    assert_eq!(cvtele(&["teleport", "--r", "1", "--input", "squeezed:1", "--out-dir", out]), EXIT_CONFIG);
    assert_eq!(cvtele(&["kernel", "--out-dir", out]), EXIT_CONFIG);
    assert_eq!(cvtele(&["frobnicate"]), EXIT_CONFIG);
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"nonsense": true}"#).unwrap();
    assert_eq!(cvtele(&["kernel", "--r", "0.1", "--config", cfg.to_str().unwrap(), "--out-dir", out]), EXIT_CONFIG);
}

#[test]
fn failing_verify_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(cvtele(&["verify", "--only", "3", "--n-max", "6", "--out-dir", out]), EXIT_FAILURE);
    assert_eq!(cvtele(&["verify", "--only", "6", "--out-dir", out]), EXIT_OK);
    let m = manifest(dir.path(), "verify");
    assert_eq!(m["results"][0]["id"], 6);
}

#[test]
fn fidelity_sweep_tracks_analytic_law() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let args = ["fidelity-sweep", "--r-max", "1.0", "--r-step", "0.5", "--no-oracle", "--n-max", "30", "--out-dir", out];
    assert_eq!(cvtele(&args), EXIT_OK);
    let m = manifest(dir.path(), "fidelity-sweep");
    assert_eq!(m["results"]["points"], 3);
    assert!(m["results"]["max_deviation_from_analytic"].as_f64().unwrap() < 1e-3);
    assert_eq!(m["results"]["monotone_in_r"], true);
}
