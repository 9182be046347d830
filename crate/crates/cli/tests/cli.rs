use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> String {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data");
    root.join(name).to_string_lossy().into_owned()
}

fn emcc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emcc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn study_bounds(extra: &[&str]) -> Output {
    let (m, d) = (data("study.json"), data("study.csv"));
    let mut args = vec!["bounds", "-m", &m, "-d", &d, "-q", "pns(X, Y)"];
    args.extend_from_slice(extra);
    emcc(&args)
}

#[test]
fn study_pns_bounds() {
    let v = stdout_json(&study_bounds(&["-n", "50", "--seed", "1"]));
    let lower = v["lower"].as_f64().unwrap();
    let upper = v["upper"].as_f64().unwrap();
    assert!(lower >= 0.0 && lower < upper);
    assert!((upper - 0.014563).abs() < 1e-4, "upper {upper}");
    let values: Vec<f64> = v["values"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert_eq!(values.len(), 50);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert_eq!((lo, hi), (lower, upper));
}

#[test]
fn single_run_gives_degenerate_interval() {
    let v = stdout_json(&study_bounds(&["-n", "1", "--seed", "4"]));
    assert_eq!(v["lower"], v["upper"]);
}

#[test]
fn same_seed_same_report() {
    let a = study_bounds(&["-n", "5", "--seed", "9"]);
    let b = study_bounds(&["-n", "5", "--seed", "9", "--jobs", "1"]);
    assert_eq!(stdout_json(&a), stdout_json(&b));
}

#[test]
fn missing_seed_is_printed() {
    let out = study_bounds(&["-n", "2"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed: "));
}

#[test]
fn report_and_trace_files() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let trace = dir.path().join("t.jsonl");
    let out = study_bounds(&[
        "-n",
        "3",
        "--seed",
        "2",
        "--out",
        report.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["values"].as_array().unwrap().len(), 3);
    let lines = std::fs::read_to_string(&trace).unwrap();
    assert_eq!(lines.lines().count(), 3);
    for line in lines.lines() {
        serde_json::from_str::<Value>(line).unwrap();
    }
}

#[test]
fn bad_query_fails() {
    let out = study_bounds(&["-q", "pns(X, Nope)", "--seed", "1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn missing_data_file_fails() {
    let m = data("study.json");
    let out = emcc(&["compat", "-m", &m, "-d", "/nonexistent/data.csv"]);
    assert!(!out.status.success());
}

#[test]
fn compat_verdicts() {
    let d = data("study.csv");
    for (model, verdict) in [
        ("study.json", "compatible"),
        ("study-restricted.json", "incompatible"),
    ] {
        let m = data(model);
        let v = stdout_json(&emcc(&["compat", "-m", &m, "-d", &d, "--seed", "1"]));
        assert_eq!(v["verdict"], verdict, "{model}");
    }
}

#[test]
fn exact_study_pns() {
    let (m, d) = (data("study.json"), data("study.csv"));
    let v = stdout_json(&emcc(&["exact", "-m", &m, "-d", &d, "-q", "pns(X, Y)"]));
    assert!(v["lower"].as_f64().unwrap().abs() < 1e-9);
    assert!((v["upper"].as_f64().unwrap() - 0.014563).abs() < 1e-6);
}

fn bench(args: &[&str]) -> Vec<csv::StringRecord> {
    let out = emcc(args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let mut r = csv::Reader::from_reader(out.stdout.as_slice());
    assert_eq!(r.headers().unwrap().get(0), Some("instance"));
    r.records().map(|x| x.unwrap()).collect()
}

#[test]
fn markovian_bench_rows() {
    let rows = bench(&[
        "bench", "--m", "4", "--instances", "2", "-n", "6", "--seed", "1",
    ]);
    assert_eq!(rows.len(), 12);
    for inst in ["0", "1"] {
        let rmse: Vec<f64> = rows
            .iter()
            .filter(|r| &r[0] == inst)
            .map(|r| r[10].parse().unwrap())
            .collect();
        assert_eq!(rmse.len(), 6);
        assert!(rmse.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }
    assert!(rows.iter().all(|r| &r[12] == "exact"));
}

#[test]
fn general_bench_uses_reference() {
    let rows = bench(&[
        "bench",
        "--class",
        "general",
        "--m",
        "3",
        "--instances",
        "1",
        "-n",
        "3",
        "--reference-runs",
        "20",
        "--seed",
        "2",
    ]);
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| &r[12] == "em-reference"));
}

#[test]
fn zero_instances_header_only() {
    let rows = bench(&["bench", "--instances", "0", "--seed", "1"]);
    assert!(rows.is_empty());
}
