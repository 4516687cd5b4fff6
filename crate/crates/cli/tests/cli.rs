use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn postsel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_postsel")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json output")
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn steering_bound_record() {
    let v = json(&postsel(&["bound", "--preset", "bell-state-zx"]));
    assert!((v["bound"].as_f64().unwrap() - (1.0 + 0.5f64.sqrt())).abs() < 1e-6);
    assert!((v["quantum_value"].as_f64().unwrap() - 2.0).abs() < 1e-9);
    assert_eq!(v["violated"], Value::Bool(true));
    assert_eq!(v["status"], "optimal");
    assert!(v["gap"].as_f64().unwrap() <= 1e-7);
}

#[test]
fn correlated_chsh_bound() {
    let v = json(&postsel(&["bound", "--preset", "chsh-correlated", "--eta", "0.5"]));
    assert!((v["bound"].as_f64().unwrap() - 2.0).abs() < 1e-7);
    assert_eq!(v["lp_check"].as_f64().unwrap(), 2.0);
}

#[test]
fn ghz_ideal_bound() {
    let v = json(&postsel(&["bound", "--preset", "ghz"]));
    assert!(v["bound"].as_f64().unwrap() <= 1e-6);
    assert!((v["quantum_value"].as_f64().unwrap() - 3.4377).abs() < 0.01);
}

#[test]
fn ghz_sweep_crossing_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ghz.csv");
    let out = postsel(&["sweep", "--preset", "ghz", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    let csv = fs::read_to_string(&path).unwrap();
    assert!(csv.contains("# scenario_sha256: "));
    let rows = rows(&csv);
    assert_eq!(rows.len(), 76);
    let etas: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert!(etas.windows(2).all(|w| w[0] < w[1]));
    let first = rows.iter().position(|r| r[3] == "true").unwrap();
    let below: f64 = rows[first - 1][0].parse().unwrap();
    let above: f64 = rows[first][0].parse().unwrap();
    assert!(below >= 0.32 && above <= 0.34, "bracket [{below}, {above}]");
    assert!(rows[first..].iter().all(|r| r[3] == "true"));
    for r in &rows {
        let (b, q): (f64, f64) = (r[1].parse().unwrap(), r[2].parse().unwrap());
        assert_eq!(r[3] == "true", q > b + 1e-7);
    }
    let again = postsel(&["sweep", "--preset", "ghz"]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), csv);

    let ok = postsel(&["verify", "--preset", "ghz", "--reference", path.to_str().unwrap()]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stdout));
    let tampered = csv.replacen("0.5,", "0.5,9", 1);
    assert_ne!(tampered, csv);
    fs::write(&path, tampered).unwrap();
    let bad = postsel(&["verify", "--preset", "ghz", "--reference", path.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("FAIL reference"));
}

#[test]
fn verify_passes_on_presets() {
    for p in ["bell-state-zx", "pauli-steering", "chsh-correlated", "chsh-one-sided"] {
        let out = postsel(&["verify", "--preset", p]);
        assert!(out.status.success(), "{p}: {}", String::from_utf8_lossy(&out.stdout));
        assert!(!String::from_utf8_lossy(&out.stdout).contains("FAIL"));
    }
}

#[test]
fn oracle_saturation_at_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    fs::write(
        &path,
        r#"{"kind":"steering","measurements":{"name":"pauli"},"functional":{"type":"projective"},
           "efficiency":{"etas":[0.3333333333333333,0.3333333333333333,0.3333333333333334]}}"#,
    )
    .unwrap();
    let out = postsel(&["verify", path.to_str().unwrap()]);
    let report = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{report}");
    assert!(report.contains("PASS oracle-reproduction"));
    assert!(report.contains("PASS oracle-saturation"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\n  \"kind\": \"steering\",\n  \"functional\": {\"type\": 7}\n}\n").unwrap();
    let out = postsel(&["bound", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json:3:"), "{err}");

    assert_eq!(postsel(&["bound", "--preset", "nope"]).status.code(), Some(1));

    let inconsistent = dir.path().join("inc.json");
    fs::write(
        &inconsistent,
        r#"{"kind":"bell","functional":{"type":"tilted-chsh","alpha":1.0},
           "efficiency":{"eta_ab":[[0.9,0.9],[0.9,0.9]],"eta_a":[0.5,0.5],"eta_b":[0.5,0.5]}}"#,
    )
    .unwrap();
    let out = postsel(&["bound", inconsistent.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn correlator_scenario_matches_preset() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chsh.json");
    fs::write(
        &path,
        r#"{"kind":"bell","state":{"name":"max-entangled","dim":2},
           "measurements":{"name":"xz","alice":[0.0,1.5707963267948966],"bob":[0.7853981633974483,-0.7853981633974483]},
           "functional":{"type":"correlators","settings":2,"terms":[
             {"coefficient":1.0,"alice":0,"bob":0},{"coefficient":1.0,"alice":1,"bob":0},
             {"coefficient":1.0,"alice":0,"bob":1},{"coefficient":-1.0,"alice":1,"bob":1}]},
           "efficiency":{"preset":"one-sided","eta":0.8}}"#,
    )
    .unwrap();
    let v = json(&postsel(&["bound", path.to_str().unwrap()]));
    assert!((v["quantum_value"].as_f64().unwrap() - 2.0 * 2f64.sqrt()).abs() < 1e-9);
    assert!((v["lp_check"].as_f64().unwrap() - 2.5).abs() < 1e-9);
    assert_eq!(v["violated"], Value::Bool(true));
}
