use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn divkit(args: &[&str], seed_env: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_divkit"));
    cmd.args(args).env_remove("DIVKIT_SEED");
    if let Some(s) = seed_env {
        cmd.env("DIVKIT_SEED", s);
    }
    cmd.output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn energy_of_a_set_against_itself_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.csv", "x,y\n0,0\n1,2\n-3,0.5\n");
    let out = divkit(&["energy", "--alpha", "1", "--mu", &a, "--nu", &a], None);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["result"]["value"].as_f64().unwrap(), 0.0);
    assert_eq!(v["config"]["seed"], 0);
}

#[test]
fn two_point_energy_matches_hand_value() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.csv", "x\n0\n");
    let b = write(dir.path(), "b.csv", "x\n2\n");
    let v = json(&divkit(&["energy", "--alpha", "1", "--mu", &a, "--nu", &b], None));
    assert!((v["result"]["value"].as_f64().unwrap() - 4.0).abs() < 1e-12);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.csv", "x\n0\n1\n");
    let b = write(dir.path(), "b.csv", "x,y\n0,0\n");
    // usage error
    assert_eq!(divkit(&["energy"], None).status.code(), Some(2));
    assert_eq!(divkit(&["nope"], None).status.code(), Some(2));
    // runtime error: dimension mismatch, missing file, inadmissible order
    let mismatch = divkit(&["energy", "--alpha", "1", "--mu", &a, "--nu", &b], None);
    assert_eq!(mismatch.status.code(), Some(1));
    assert!(json(&mismatch)["error"]["kind"].is_string());
    let missing = divkit(&["energy", "--alpha", "1", "--mu", &a, "--nu", "/nonexistent.csv"], None);
    assert_eq!(missing.status.code(), Some(1));
    let bad = divkit(&["energy", "--alpha", "2", "--mu", &a, "--nu", &a], None);
    assert_eq!(bad.status.code(), Some(1));
    assert_eq!(divkit(&["selftest"], None).status.code(), Some(0));
}

#[test]
fn seed_from_environment_overrides_flag() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.csv", "x\n0\n");
    let args = ["--seed", "5", "energy", "--alpha", "1", "--mu", &a, "--nu", &a];
    assert_eq!(json(&divkit(&args, None))["config"]["seed"], 5);
    assert_eq!(json(&divkit(&args, Some("77")))["config"]["seed"], 77);
    assert_eq!(divkit(&args, Some("minus one")).status.code(), Some(2));
}

#[test]
fn table_format_is_flat_key_value() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.csv", "x\n0\n1\n");
    let b = write(dir.path(), "b.csv", "x\n3\n1\n");
    let out = divkit(&["--format", "table", "wasserstein", "--p", "1", "--mu", &a, "--nu", &b], None);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let line = text.lines().find(|l| l.starts_with("result.value\t")).unwrap();
    let value: f64 = line.split('\t').nth(1).unwrap().parse().unwrap();
    assert!((value - 1.5).abs() < 1e-12);
    assert!(text.lines().all(|l| l.contains('\t')));
}

#[test]
fn whiten_writes_an_identity_covariance_csv() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.csv", "x,y\n0,0\n10,1\n3,-2\n-4,5\n7,7\n");
    let out_path = dir.path().join("w.csv");
    let out = divkit(&["whiten", "--method", "cholesky", "--in", &a, "--out", out_path.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(0));
    let w = divkit::load_samples(&out_path, None).unwrap();
    let cov = w.covariance().matrix;
    for i in 0..2 {
        for j in 0..2 {
            let target = if i == j { 1.0 } else { 0.0 };
            assert!((cov[(i, j)] - target).abs() < 1e-10, "{cov}");
        }
    }
}

#[test]
fn kinetics_reports_its_options_and_keeps_the_mean() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.json");
    let out = divkit(
        &[
            "kinetics", "--lambda", "0.5", "--sigma", "0.5", "--n", "500", "--horizon", "2", "--checkpoints", "2",
            "--probes", "energy:1,w1", "--conserve-mean",
            "--out", trace.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["result"]["conserve_mean"], true);
    assert!((v["result"]["final_mean"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    let entries: Value = serde_json::from_str(&std::fs::read_to_string(&trace).unwrap()).unwrap();
    assert_eq!(entries.as_array().unwrap().len(), 6);
}

#[test]
fn kinetics_accepts_an_equilibrium_draw_start() {
    let args = [
        "kinetics", "--lambda", "0.5", "--sigma", "0.5", "--n", "300", "--horizon", "1", "--checkpoints", "1",
        "--probes", "w1", "--initial", "equilibrium-draw",
    ];
    let out = divkit(&args, None);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(out.stdout, divkit(&args, None).stdout);
}
