use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cat_amp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cat-amp")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn theory_gain_prints_summary_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "g.json", r#"{"mode":"theory-gain","alpha":1.5,"parity":"even","k":1}"#);
    let out = dir.path().join("out");
    let o = cat_amp(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["G"].as_f64().unwrap() - 1.19).abs() < 0.01);
    assert!(v["F_max"].as_f64().unwrap() > 0.99);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["tool"], "cat-amp");
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert!(manifest["wall_seconds"].as_f64().unwrap() >= 0.0);
    assert!(out.join("theory_gain.json").exists());
}

#[test]
fn malformed_config_exits_2_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    for (i, text) in [
        r#"{"mode":"theory-gain","alpha":1.5}"#,
        r#"{"mode":"theory-gain","alpha":1.5,"parity":"even","bogus":1}"#,
        r#"{"mode":"theory-gain","alpha":-2,"parity":"even"}"#,
        r#"{"mode":"simulate","alpha":1.5,"parity":"even","k":2,"reset_mode":"skip"}"#,
        "not json",
    ]
    .iter()
    .enumerate()
    {
        let cfg = write_config(dir.path(), &format!("bad{i}.json"), text);
        let o = cat_amp(&["run", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{text}");
        assert!(!out.exists(), "{text}");
    }
}

#[test]
fn missing_config_exits_4() {
    let o = cat_amp(&["run", "/nonexistent/cfg.json"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn theory_curve_csv_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"mode":"theory-curve","alpha":1.5,"parity":"odd","k":2,"points":21}"#,
    );
    let read = |name: &str| {
        let out = dir.path().join(name);
        let o = cat_amp(&["run", &cfg, "--out", out.to_str().unwrap()]);
        assert!(o.status.success());
        fs::read_to_string(out.join("theory_curve.csv")).unwrap()
    };
    let a = read("a");
    assert_eq!(a, read("b"));
    let mut lines = a.lines();
    assert_eq!(lines.next().unwrap().split(',').count(), 3);
    assert_eq!(lines.count(), 21);
}

#[test]
fn output_path_from_config_and_nc_override() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("from_cfg");
    let text = format!(
        r#"{{"mode":"wigner","state":{{"cat":{{"alpha":1.0,"parity":"odd"}}}},"grid":{{"x_min":-1,"x_max":1,"p_min":-1,"p_max":1,"nx":3,"np":3}},"output_path":{}}}"#,
        serde_json::to_string(out.to_str().unwrap()).unwrap()
    );
    let cfg = write_config(dir.path(), "w.json", &text);
    let o = cat_amp(&["run", &cfg, "--nc", "18"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["cavity_dim"], 18);
    let csv = fs::read_to_string(out.join("wigner.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "x,p,W");
    assert_eq!(csv.lines().count(), 10);
    let center: Vec<f64> = csv.lines().nth(5).unwrap().split(',').map(|s| s.parse().unwrap()).collect();
    assert!(center[0].abs() < 1e-12 && center[1].abs() < 1e-12 && center[2] < 0.0);
}

#[test]
fn reproduce_fig1_fast() {
    let dir = tempfile::tempdir().unwrap();
    let o = cat_amp(&["reproduce", "fig1", "--fast", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("fig1/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["curves"].as_array().unwrap().len(), 8);
    assert!(dir.path().join("fig1/manifest.json").exists());
}

#[test]
fn reproduce_fig4_fast_signs() {
    let dir = tempfile::tempdir().unwrap();
    let o = cat_amp(&["reproduce", "fig4", "--fast", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("fig4/summary.json")).unwrap()).unwrap();
    for p in summary["panels"].as_array().unwrap() {
        assert_eq!(p["sign_ok"], true, "{p}");
    }
}

#[test]
fn schema_is_valid_json() {
    let o = cat_amp(&["schema"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["oneOf"].as_array().unwrap().len(), 5);
}
