use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skewlab")).args(args).output().unwrap()
}

fn records(out: &Output) -> Vec<Value> {
    String::from_utf8(out.stdout.clone())
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn schema() -> jsonschema::JSONSchema {
    let out = run(&["schema"]);
    assert!(out.status.success());
    let s: Value = serde_json::from_slice(&out.stdout).unwrap();
    jsonschema::JSONSchema::compile(&s).unwrap()
}

fn assert_valid(schema: &jsonschema::JSONSchema, r: &Value) {
    if let Err(errors) = schema.validate(r) {
        let msgs: Vec<String> = errors.map(|e| format!("{e} at {}", e.instance_path)).collect();
        panic!("record does not match schema: {msgs:?}");
    }
}

#[test]
fn pinch_record_carries_band_and_passes() {
    let out = run(&["pinch", "--N", "20", "--samples", "200"]);
    assert_eq!(out.status.code(), Some(0));
    let r = &records(&out)[0];
    assert_valid(&schema(), r);
    assert_eq!(r["experiment"], "pinch");
    assert_eq!(r["pass"], true);
    let lam = r["measured"]["lambda_n"]["value"].as_f64().unwrap();
    let half = r["measured"]["uu_max_offset"]["tolerance"].as_f64().unwrap();
    assert!((half - 3.0 * lam).abs() < 1e-20);
    let lo = r["measured"]["uu_band_lo"]["value"].as_f64().unwrap();
    assert!((lo - (0.8506508 - 3.0 * lam)).abs() < 1e-7);
}

#[test]
fn lyapunov_record_has_analytic_extremes() {
    let out = run(&["lyapunov", "--N", "10", "--samples", "2", "--horizon", "10000"]);
    assert_eq!(out.status.code(), Some(0));
    let r = &records(&out)[0];
    assert_valid(&schema(), r);
    let m = &r["measured"];
    assert!((m["mean_chi1"]["value"].as_f64().unwrap() - 19.2485).abs() < 1e-3);
    assert!((m["mean_chi4"]["value"].as_f64().unwrap() + 19.2485).abs() < 1e-3);
    assert!(m["sum_defect"]["value"].as_f64().unwrap() < 1e-6);
}

#[test]
fn every_experiment_writes_a_valid_record() {
    let schema = schema();
    let cases: [&[&str]; 11] = [
        &["orbit", "--steps", "20"],
        &["lyapunov", "--samples", "1", "--horizon", "5000"],
        &["cones", "--samples", "500"],
        &["bundle"],
        &["pinch", "--samples", "50"],
        &["good-fraction", "--N", "100", "--samples", "500"],
        &["good-point", "--N", "20"],
        &["curve-grow", "--N", "150"],
        &["heteroclinic", "--N", "8"],
        &["holonomy", "--N", "8", "--grid", "3"],
        &["mix", "--N", "8"],
    ];
    for args in cases {
        let out = run(args);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        let rs = records(&out);
        assert_eq!(rs.len(), 1);
        assert_valid(&schema, &rs[0]);
        assert_eq!(rs[0]["experiment"], args[0]);
    }
}

#[test]
fn unknown_subcommand_exits_2_without_records() {
    let out = run(&["teleport"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn invalid_configuration_exits_2() {
    for args in [
        &["orbit", "--N", "1000"][..],
        &["orbit", "--matrix", "1", "1", "0", "1"],
        &["orbit", "--epsilon", "0.5"],
        &["orbit", "--bits", "64"],
        &["cones", "--samples", "0"],
        &["orbit", "--tol", "roundtrip"],
        &["mix", "--box", "1,2,3"],
    ] {
        let out = run(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(out.stdout.is_empty(), "{args:?}");
    }
}

#[test]
fn failed_verdict_exits_1_with_record() {
    let out = run(&["holonomy", "--N", "8", "--grid", "3", "--tol", "holonomy=1e-9"]);
    assert_eq!(out.status.code(), Some(1));
    let r = &records(&out)[0];
    assert_eq!(r["pass"], false);
    assert_eq!(r["verdicts"]["small"], false);
    assert_eq!(r["measured"]["sup"]["tolerance"], 1e-9);
}

#[test]
fn experiment_error_names_the_stage() {
    let out = run(&["curve-grow", "--N", "150", "--epsilon", "1e-3"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("stage `curve-grow`"), "{err}");
}

#[test]
fn config_file_is_overridden_by_flags_and_snapshotted() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"N": 12, "seed": 5, "samples": 300, "tolerances": {"alpha": 0.2}}"#).unwrap();
    let out = run(&["cones", "--config", cfg.to_str().unwrap(), "--N", "20"]);
    assert_eq!(out.status.code(), Some(0));
    let r = &records(&out)[0];
    assert_eq!(r["config"]["N"], 20.0);
    assert_eq!(r["config"]["seed"], 5);
    assert_eq!(r["config"]["samples"], 300);
    assert_eq!(r["measured"]["stable_worst_ratio"]["tolerance"], 0.2);

    // the snapshot is itself a valid config that reproduces the run
    let snap = dir.path().join("snap.json");
    std::fs::write(&snap, r["config"].to_string()).unwrap();
    let again = records(&run(&["cones", "--config", snap.to_str().unwrap()]));
    assert_eq!(again[0]["config"], r["config"]);
    assert_eq!(again[0]["measured"], r["measured"]);
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"N": 12, "colour": "blue"}"#).unwrap();
    assert_eq!(run(&["orbit", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn records_and_csv_go_to_files() {
    let dir = tempfile::tempdir().unwrap();
    let (jl, csv) = (dir.path().join("r.jsonl"), dir.path().join("rows.csv"));
    let out = run(&["orbit", "--steps", "7", "--out", jl.to_str().unwrap(), "--csv", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&jl).unwrap();
    assert_eq!(text.lines().count(), 1);
    let rows = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = rows.lines().collect();
    assert_eq!(lines[0], "step,x,y,z,w");
    assert_eq!(lines.len(), 1 + 8);
}

#[test]
fn holonomy_sweep_over_n_decreases() {
    let out = run(&["sweep", "--axis", "N", "--values", "8,10,12,14", "--experiment", "holonomy", "--grid", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let rs = records(&out);
    assert_eq!(rs.len(), 4);
    let sups: Vec<f64> = rs.iter().map(|r| r["measured"]["sup"]["value"].as_f64().unwrap()).collect();
    assert!(sups.windows(2).all(|w| w[1] < w[0]), "{sups:?}");
}

#[test]
fn epsilon_sweep_on_cones_passes() {
    let out = run(&["sweep", "--axis", "epsilon", "--values", "0,1e-4,1e-3", "--experiment", "cones", "--N", "20", "--samples", "1000"]);
    assert_eq!(out.status.code(), Some(0));
    let rs = records(&out);
    assert_eq!(rs.len(), 3);
    assert!(rs.iter().all(|r| r["pass"] == true));
    let eps: Vec<f64> = rs.iter().map(|r| r["config"]["epsilon"].as_f64().unwrap()).collect();
    assert_eq!(eps, vec![0.0, 1e-4, 1e-3]);
}

#[test]
fn bad_sweep_value_exits_2() {
    let out = run(&["sweep", "--axis", "N", "--values", "8,ten", "--experiment", "orbit"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn empty_sweep_writes_nothing() {
    let out = run(&["sweep", "--axis", "seed", "--values=", "--experiment", "orbit"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
}

#[test]
fn sweeps_are_deterministic_and_schedule_independent() {
    let args = ["sweep", "--axis", "N", "--values", "10,20", "--experiment", "cones", "--samples", "400", "--seed", "3"];
    let a = records(&run(&args));
    let b = records(&run(&args));
    let mut seq = args.to_vec();
    seq.push("--sequential");
    let c = records(&run(&seq));
    for i in 0..2 {
        assert_eq!(a[i]["measured"], b[i]["measured"]);
        assert_eq!(a[i]["measured"], c[i]["measured"]);
        assert_eq!(a[i]["config"]["seed"], b[i]["config"]["seed"]);
    }
    assert_ne!(a[0]["config"]["seed"], a[1]["config"]["seed"]);
}

#[test]
fn sweep_csv_is_labelled_by_value() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    let out = run(&["sweep", "--axis", "seed", "--values", "1,2", "--experiment", "lyapunov", "--samples", "2", "--horizon", "5000", "--csv", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(Path::new(&csv)).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "sweep_value,sample,chi1,chi2,chi3,chi4,sum_defect");
    assert_eq!(lines.len(), 1 + 4);
    assert!(lines[3].starts_with("2,"));
}
