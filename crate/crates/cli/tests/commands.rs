use std::path::Path;

use nalgebra::{dmatrix, DMatrix, DVector};
use setlib::Zonotope;
use sysmodel::io::{write_model, write_suite};
use sysmodel::{LtiSystem, TestCase, TestSuite, Timing};
use tempfile::TempDir;

fn run(dir: &Path, args: &[&str]) -> u8 {
    let out = dir.to_str().unwrap();
    rcsynth::main_with_args(["rcsynth", "--out", out].iter().copied().chain(args.iter().copied()))
}

fn report(dir: &Path, command: &str) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{command}-report.json"))).unwrap()).unwrap()
}

fn boxed(h: &[f64]) -> Zonotope {
    Zonotope::centered_box(DVector::zeros(h.len()), h).unwrap()
}

/// `x⁺ = 0.5 x + w`, `w ∈ [−w, w]`, `y = x`.
fn halving(w: f64) -> LtiSystem {
    LtiSystem::new(dmatrix![0.5], dmatrix![1.0], dmatrix![1.0], dmatrix![0.0], Timing::Discrete(0.1))
        .unwrap()
        .with_disturbance(dmatrix![1.0], boxed(&[w]))
        .unwrap()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

#[test]
fn missing_config_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run(dir.path(), &["--config", "/nonexistent/lab.json", "simulate"]), 2);
    assert_eq!(run(dir.path(), &["simulate", "--no-such-flag"]), 2);
    assert_eq!(rcsynth::main_with_args(["rcsynth", "--help"]), 0);
}

#[test]
fn invalid_config_values_are_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = path(&dir, "lab.json");
    std::fs::write(&cfg, r#"{"dt": -1.0}"#).unwrap();
    assert_eq!(run(dir.path(), &["--config", &cfg, "simulate"]), 2);
    std::fs::write(&cfg, r#"{"seed": 3, "references": {"count": 1, "duration": 1.0}}"#).unwrap();
    assert_eq!(run(dir.path(), &["--config", &cfg, "simulate"]), 0);
    let resolved: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("config.resolved.json")).unwrap()).unwrap();
    assert_eq!(resolved["seed"], 3);
    assert_eq!(report(dir.path(), "simulate")["schema_version"], rcsynth::SCHEMA_VERSION);
}

#[test]
fn zero_duration_gives_an_empty_suite() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run(dir.path(), &["simulate", "--duration", "0"]), 0);
    let rep = report(dir.path(), "simulate");
    assert_eq!(rep["axes"][0]["cases"], 0);
    assert_eq!(rep["axes"][0]["samples"], 0);
}

#[test]
fn simulate_writes_one_suite_per_axis() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run(dir.path(), &["simulate", "--axes", "1,3", "--count", "2", "--duration", "1"]), 0);
    let rep = report(dir.path(), "simulate");
    assert_eq!(rep["axes"].as_array().unwrap().len(), 2);
    assert!(dir.path().join("axis_3").is_dir());
    assert_eq!(run(dir.path(), &["simulate", "--axes", "9"]), 2);
}

#[test]
fn identify_reports_one_row_per_candidate() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run(dir.path(), &["simulate", "--count", "2", "--duration", "3"]), 0);
    let suite = path(&dir, "axis_1");
    assert_eq!(run(dir.path(), &["identify", "--suite", &suite, "--candidates", "Rd,ROd,RODd"]), 0);
    let rows = report(dir.path(), "identify")["candidates"].as_array().unwrap().clone();
    let names: Vec<&str> = rows.iter().map(|r| r["candidate"].as_str().unwrap()).collect();
    assert_eq!(names, ["Rd", "ROd", "RODd"]);
    assert!(rows.iter().all(|r| r["conformant"] == true));
    // The identified model conforms to the data it came from.
    let model = path(&dir, "model_RODd.json");
    assert_eq!(run(dir.path(), &["check", "--model", &model, "--suite", &suite, "--candidate", "RODd"]), 0);
    let check = report(dir.path(), "check");
    assert_eq!(check["conformant"], true);
    assert_eq!(check["violations"], 0);
}

#[test]
fn out_of_span_data_is_a_coverage_error() {
    let dir = TempDir::new().unwrap();
    // No output error and disturbance on an unmeasured state: step 0 admits
    // only zero deviations.
    let sys = LtiSystem::new(DMatrix::identity(2, 2), DMatrix::zeros(2, 1), dmatrix![1.0, 0.0], dmatrix![0.0], Timing::Discrete(1.0))
        .unwrap()
        .with_disturbance(dmatrix![0.0; 1.0], boxed(&[1.0]))
        .unwrap()
        .with_measurement_error(dmatrix![0.0], boxed(&[1.0]))
        .unwrap();
    let suite = TestSuite::from_cases(1.0, vec![TestCase::new(DMatrix::zeros(1, 3), dmatrix![0.3, 0.1, 0.2], DVector::zeros(2)).unwrap()]).unwrap();
    write_model(&dir.path().join("m.json"), &sys).unwrap();
    write_suite(&dir.path().join("s"), &suite).unwrap();
    assert_eq!(run(dir.path(), &["identify", "--model", &path(&dir, "m.json"), "--suite", &path(&dir, "s"), "--horizon", "2"]), 3);
}

#[test]
fn delay_free_state_feedback_is_infeasible() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run(dir.path(), &["synth", "state-feedback", "--candidate", "Rd"]), 4);
    let rep = report(dir.path(), "synth");
    assert_eq!(rep["outcome"], "infeasible");
    assert!(rep["parameters"].is_null());
}

#[test]
fn observer_transient_reports_the_sweep() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run(dir.path(), &["synth", "observer-a2"]), 0);
    let rep = report(dir.path(), "synth");
    let t_inf = rep["t_inf"].as_f64().unwrap();
    for point in rep["sweep"].as_array().unwrap() {
        assert!(point["t_inf"].as_f64().is_none_or(|t| t > t_inf));
    }
}

#[test]
fn noise_free_model_has_a_zero_width_tube() {
    let dir = TempDir::new().unwrap();
    write_model(&dir.path().join("m.json"), &halving(0.0)).unwrap();
    assert_eq!(run(dir.path(), &["reach", "--model", &path(&dir, "m.json"), "--x0", "-1.5", "--steps", "5"]), 0);
    let mut rows = csv::Reader::from_path(dir.path().join("reach.csv")).unwrap();
    assert_eq!(rows.headers().unwrap(), vec!["k", "dim", "lower", "upper"]);
    let mut count = 0;
    for (k, row) in rows.records().enumerate() {
        let row = row.unwrap();
        let (lo, hi): (f64, f64) = (row[2].parse().unwrap(), row[3].parse().unwrap());
        assert_eq!(lo, hi);
        assert!((lo + 1.5 * 0.5f64.powi(k as i32)).abs() < 1e-12);
        count += 1;
    }
    assert_eq!(count, 6);
}

#[test]
fn terminal_reach_matches_the_geometric_series() {
    let dir = TempDir::new().unwrap();
    write_model(&dir.path().join("m.json"), &halving(1.0)).unwrap();
    assert_eq!(run(dir.path(), &["reach", "--model", &path(&dir, "m.json"), "--terminal"]), 0);
    let rep = report(dir.path(), "reach");
    assert!((rep["hull_side_sum"].as_f64().unwrap() - 4.0).abs() < 1e-3);
    assert!((rep["upper"][0].as_f64().unwrap() - 2.0).abs() < 1e-3);

    let unstable = LtiSystem::new(dmatrix![2.0], dmatrix![1.0], dmatrix![1.0], dmatrix![0.0], Timing::Discrete(0.1))
        .unwrap()
        .with_disturbance(dmatrix![1.0], boxed(&[1.0]))
        .unwrap();
    write_model(&dir.path().join("u.json"), &unstable).unwrap();
    assert_eq!(run(dir.path(), &["reach", "--model", &path(&dir, "u.json"), "--terminal"]), 2);
}

#[test]
fn reach_rejects_mismatched_initial_state() {
    let dir = TempDir::new().unwrap();
    write_model(&dir.path().join("m.json"), &halving(1.0)).unwrap();
    assert_eq!(run(dir.path(), &["reach", "--model", &path(&dir, "m.json"), "--x0", "1,2"]), 2);
}
