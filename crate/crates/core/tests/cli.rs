use std::path::Path;

use perfect_gibbs::cli::{run, EXIT_CONDITIONS, EXIT_OK, EXIT_USAGE};

fn invoke(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["perfect-gibbs"];
    argv.extend_from_slice(args);
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn model(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn nn(dir: &Path, beta: f64) -> String {
    model(
        dir,
        &format!("nn-{beta}.toml"),
        &format!("dimension = 1\nbeta = {beta}\n\n[potential]\nkind = \"nearest-neighbor\"\namplitude = 1.0\n"),
    )
}

#[test]
fn check_reports_failed_termination() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, out, _) = invoke(&["check", &nn(tmp.path(), 0.3)]);
    assert_eq!(code, EXIT_CONDITIONS);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["conditions"]["termination"]["status"], "fail");
    let sum = v["conditions"]["termination"]["value"].as_f64().unwrap();
    assert!((sum - 2.0964).abs() < 1e-4, "{sum}");

    let (code, out, _) = invoke(&["check", &nn(tmp.path(), 0.05)]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("\"gamma\""));
}

#[test]
fn unknown_model_key_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = model(
        tmp.path(),
        "bad.toml",
        "dimension = 1\nbeta = 0.05\n\n[potential]\nkind = \"nearest-neighbor\"\namplitude = 1.0\nstrength = 2.0\n",
    );
    let (code, _, err) = invoke(&["check", &bad]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("strength"), "{err}");
}

#[test]
fn zero_replicas_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let (code, _, err) = invoke(&[
        "sample",
        &nn(tmp.path(), 0.05),
        "--window",
        "0;1",
        "--replicas",
        "0",
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("replicas"), "{err}");
}

#[test]
fn seed_is_mandatory() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, _, err) = invoke(&["sample", &nn(tmp.path(), 0.05), "--window", "0", "--replicas", "5", "--out", "x"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("--seed"));
}

#[test]
fn window_dimension_must_match() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let (code, _, _) = invoke(&[
        "sample",
        &nn(tmp.path(), 0.05),
        "--window",
        "0,0",
        "--replicas",
        "5",
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn couple_on_finite_range_has_no_discrepancy() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let (code, _, err) = invoke(&[
        "couple",
        &nn(tmp.path(), 0.05),
        "--L",
        "1,2",
        "--replicas",
        "500",
        "--seed",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    let mut rdr = csv::Reader::from_path(out.join("discrepancy.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    let disc: Vec<_> = rows.iter().filter(|r| &r[0] == "discrepancy").collect();
    assert_eq!(disc.len(), 2);
    for r in disc {
        assert_eq!(r[2].parse::<f64>().unwrap(), 0.0);
        assert_eq!(&r[6], "true");
    }
    let lines = std::fs::read_to_string(out.join("coupled.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 1000);
}

#[test]
fn sampling_refuses_without_termination() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let (code, _, _) = invoke(&[
        "sample",
        &nn(tmp.path(), 0.3),
        "--window",
        "0",
        "--replicas",
        "5",
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_CONDITIONS);
}

#[test]
fn bounds_table_and_refusal() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, out, _) = invoke(&["bounds", &nn(tmp.path(), 0.05), "--L", "1,2"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.starts_with("quantity,parameter,value,ci_low,ci_high,bound,pass\n"));
    assert!(out.contains("bound1,L=1,0.0"));
    let (code, out, _) = invoke(&["bounds", &nn(tmp.path(), 0.6), "--L", "1"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("r,,1.2,,,1.0,false"), "{out}");
    assert!(out.contains("bound2,L=1,NaN"), "{out}");
}

#[test]
fn mixing_rejects_zero_distance() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, _, _) =
        invoke(&["mixing", &nn(tmp.path(), 0.05), "--R", "0,2", "--replicas", "5", "--seed", "1", "--out", "x"]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn verify_passes_on_reference_model() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, out, err) = invoke(&["verify", &nn(tmp.path(), 0.05), "--replicas", "1000", "--seed", "5"]);
    assert_eq!(code, EXIT_OK, "{out}{err}");
    assert!(!out.contains(",false"));
}
