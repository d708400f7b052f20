use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn speclab(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_speclab"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .output()
        .expect("run speclab")
}

fn manifest(out: &Path, command: &str) -> Value {
    let text = std::fs::read_to_string(out.join(command).join("manifest.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn assert_manifest_consistent(out: &Path, command: &str) -> Value {
    let m = manifest(out, command);
    let hash = format!("{:x}", Sha256::digest(m["config"].to_string().as_bytes()));
    assert_eq!(m["config_hash"], Value::String(hash));
    let listed: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|o| o["path"].as_str().unwrap()).collect();
    let mut on_disk: Vec<String> = std::fs::read_dir(out.join(command))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n != "manifest.json")
        .collect();
    on_disk.sort();
    let mut sorted = listed.clone();
    sorted.sort();
    assert_eq!(sorted, on_disk);
    for o in m["outputs"].as_array().unwrap() {
        let bytes = std::fs::read(out.join(command).join(o["path"].as_str().unwrap())).unwrap();
        assert_eq!(o["sha256"].as_str().unwrap(), format!("{:x}", Sha256::digest(&bytes)));
    }
    m
}

#[test]
fn dry_run_writes_only_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = speclab(tmp.path(), &["validate", "--dry-run"]);
    assert_eq!(out.status.code(), Some(0));
    let m = assert_manifest_consistent(tmp.path(), "validate");
    assert_eq!(m["dry_run"], Value::Bool(true));
    assert!(m["outputs"].as_array().unwrap().is_empty());
    assert_eq!(m["started"], Value::Null);
    assert_eq!(m["config"]["x0"], serde_json::json!([2.1, 0.1]));
}

#[test]
fn single_eps_gives_one_row() {
    let tmp = tempfile::tempdir().unwrap();
    let out = speclab(tmp.path(), &["validate", "--eps", "0.5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("validate/eigenvalues.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("eps,lambda_1,"));
    assert!(lines[1].starts_with("5.0000000000000000e-1,"));
    assert_manifest_consistent(tmp.path(), "validate");
    let sweep = std::fs::read_to_string(tmp.path().join("validate/sweep.csv")).unwrap();
    assert_eq!(
        sweep.lines().next().unwrap(),
        "eps,cluster_n,branch,lambda_perturbed,lambda_reference,d,residual"
    );
    let svg = std::fs::read_to_string(tmp.path().join("validate/sweep.svg")).unwrap();
    assert!(svg.contains("#1f4fd1"));
}

#[test]
fn config_errors_name_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg: Value = serde_json::to_value(speclab::lab::SweepConfig::validation()).unwrap();
    cfg["eps"][2] = Value::String("small".into());
    let path = tmp.path().join("bad.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    let out = speclab(tmp.path(), &["sweep", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("eps[2]"));

    cfg["eps"] = serde_json::json!([0.1, 0.5]);
    std::fs::write(&path, cfg.to_string()).unwrap();
    let out = speclab(tmp.path(), &["sweep", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("eps:"));

    cfg["eps"] = serde_json::json!([0.5]);
    cfg["extra"] = Value::Bool(true);
    std::fs::write(&path, cfg.to_string()).unwrap();
    let out = speclab(tmp.path(), &["sweep", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("extra"));
}

#[test]
fn hole_outside_the_domain_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = speclab(tmp.path(), &["validate", "--eps", "3.0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fuzz_and_predictions_pass() {
    let tmp = tempfile::tempdir().unwrap();
    let out = speclab(tmp.path(), &["cdv-fuzz", "--count", "300", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let m = assert_manifest_consistent(tmp.path(), "cdv-fuzz");
    assert_eq!(m["seed"], Value::from(3));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("cdv-fuzz/cdv_fuzz.json")).unwrap()).unwrap();
    assert_eq!(report["failed"], Value::from(0));

    let out = speclab(tmp.path(), &["predict3d"]);
    assert_eq!(out.status.code(), Some(0));
    let p: Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("predict3d/predict3d.json")).unwrap()).unwrap();
    assert_eq!(p["label"], Value::String("ball-hole prediction".into()));
    assert!(p["clusters"].as_array().unwrap().iter().any(|c| c["gamma"].as_array().unwrap().len() == 3));
    assert_manifest_consistent(tmp.path(), "predict3d");
}

#[test]
fn gamma_map_reports_the_centre_on_the_set() {
    let tmp = tempfile::tempdir().unwrap();
    let out = speclab(tmp.path(), &["gamma-map", "--nx", "200", "--ny", "100"]);
    // the centre lies on the coincidence set, so this exits with a criterion failure
    assert_eq!(out.status.code(), Some(1));
    let csv = std::fs::read_to_string(tmp.path().join("gamma-map/gamma_map.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "x,y,g1_minus_g2");
    assert_eq!(csv.lines().count(), 1 + 201 * 101);
    assert!(String::from_utf8_lossy(&out.stderr).contains("x0 off the set"));
    assert_manifest_consistent(tmp.path(), "gamma-map");
}

#[test]
fn out_dir_defaults_to_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_speclab"))
        .args(["validate", "--dry-run", "--record-time"])
        .env("SPECLAB_OUT_DIR", tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let m = manifest(tmp.path(), "validate");
    assert!(m["started"].is_u64() && m["finished"].is_u64());
}
