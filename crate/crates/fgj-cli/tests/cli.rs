use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fgj(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fgj")).args(args).env_remove("FGJ_TOL_SCALE").output().unwrap()
}

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn write_scenario(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("s.json");
    fs::write(&p, body).unwrap();
    p
}

fn num(v: &Value) -> f64 {
    v.to_string().parse().unwrap()
}

#[test]
fn free_sumrule_has_zero_residual() {
    let tmp = tempfile::tempdir().unwrap();
    let s = write_scenario(tmp.path(), r#"{"operator": {"tail": {"period": 1, "a": [1.0], "b": [0.0]}}, "suites": ["sumrule"]}"#);
    let out = tmp.path().join("out");
    let o = fgj(&["run", s.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let r: Value = serde_json::from_str(&fs::read_to_string(out.join("sumrule.json")).unwrap()).unwrap();
    assert_eq!(num(&r["summary"]["max_abs_residual_log"]), 0.0);
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn head_a2_witnesses() {
    let tmp = tempfile::tempdir().unwrap();
    let o = fgj(&["run", scenario("head_a2.json").to_str().unwrap(), "--out", tmp.path().to_str().unwrap(), "--jobs", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let r: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("sumrule.json")).unwrap()).unwrap();
    assert!(num(&r["summary"]["max_abs_residual_log"]) < 1e-6);
    assert!((num(&r["summary"]["witness_A1"]) - 2.0).abs() < 1e-12);
    assert!((num(&r["summary"]["witness_K1"]) - 3.0).abs() < 1e-9);
    // 17 significant digits
    let lit = r["summary"]["witness_K1"].to_string();
    assert_eq!(lit.split(['e', 'E']).next().unwrap().replace(['.', '-'], "").len(), 17, "{lit}");
}

#[test]
fn series_regenerates_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    assert_eq!(fgj(&["run", scenario("head_b2.json").to_str().unwrap(), "--out", out.to_str().unwrap()]).status.code(), Some(0));
    let csv = out.join("szego_ratio.sup_grid_delta.csv");
    let before = fs::read(&csv).unwrap();
    fs::remove_file(&csv).unwrap();
    assert_eq!(fgj(&["series", out.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(fs::read(&csv).unwrap(), before);
    assert!(String::from_utf8(before).unwrap().starts_with("n,sup_grid_delta\n"));
}

#[test]
fn validate_echoes_normalized_scenario() {
    let o = fgj(&["validate", scenario("head_a2.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["suites"][0], "sumrule");
    assert!(num(&v["tol"]["sumrule"]) > 0.0);
    assert!(v["gapset"]["bands"].is_array());
}

#[test]
fn randomized_suite_needs_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let s = write_scenario(tmp.path(), r#"{"operator": {"tail": {"period": 1, "a": [1.0], "b": [0.0]}}, "suites": ["rank"]}"#);
    let o = fgj(&["validate", s.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let e: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(e["error"]["code"], "scenario.invalid");
}
