use std::path::Path;
use std::process::{Command, Output};

fn drayage(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drayage")).args(args).output().expect("spawn drayage")
}

fn demo(dir: &Path, routes: &str) {
    let out = drayage(&["demo", "--out", dir.to_str().unwrap(), "--routes", routes]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn batch_then_aggregate() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    demo(&data, "2");
    let runs = tmp.path().join("runs");
    let out = drayage(&["batch", "--data", s(&data), "--out", s(&runs), "--also", "diesel"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(runs.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 2 * 3 * 2);
    assert!(summary.lines().skip(1).all(|l| l.contains(",completed,")));

    let agg = tmp.path().join("agg");
    let samples = runs.join("samples.json");
    let out = drayage(&["aggregate", "--input", s(&samples), "--out", s(&agg), "--by", "day_type"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(agg.join("aggregate.csv")).unwrap();
    // two vehicles times three day types
    assert_eq!(csv.lines().count(), 1 + 6);
    assert!(csv.lines().nth(1).unwrap().contains(",all,"));
}

#[test]
fn thread_count_does_not_change_output() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    demo(&data, "3");
    let read = |jobs: &str| {
        let dir = tmp.path().join(format!("j{jobs}"));
        let out = drayage(&["batch", "--data", s(&data), "--out", s(&dir), "--jobs", jobs]);
        assert!(out.status.success());
        std::fs::read(dir.join("summary.csv")).unwrap()
    };
    assert_eq!(read("1"), read("4"));
}

#[test]
fn failed_runs_exit_three_and_still_report() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    demo(&data, "1");
    let base = std::fs::read_to_string(data.join("vehicles/electric.json")).unwrap();
    assert!(base.contains("\"n_parallel\": 230"));
    let tiny = data.join("vehicles/tiny.json");
    std::fs::write(&tiny, base.replace("\"n_parallel\": 230", "\"n_parallel\": 4")).unwrap();
    let runs = tmp.path().join("runs");
    let out = drayage(&["batch", "--data", s(&data), "--vehicle", s(&tiny), "--out", s(&runs)]);
    assert_eq!(out.status.code(), Some(3));
    let summary = std::fs::read_to_string(runs.join("summary.csv")).unwrap();
    assert!(summary.lines().skip(1).all(|l| l.contains(",soc_floor,")));
}

#[test]
fn bad_input_exits_two() {
    let out = drayage(&["simulate", "--route", "/definitely/missing.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.csv"));

    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    demo(&data, "1");
    let route = std::fs::read_dir(data.join("routes")).unwrap().next().unwrap().unwrap().path();
    let out = drayage(&["simulate", "--route", s(&route), "--dt", "5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_and_perf_print_results() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    demo(&data, "1");
    let route = std::fs::read_dir(data.join("routes")).unwrap().next().unwrap().unwrap().path();
    let out = drayage(&["simulate", "--route", s(&route), "--vehicle", "diesel", "--format", "json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v.is_object());

    let out = drayage(&["perf", "--vehicle", "electric", "--format", "json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let vmax = v["max_speed_kmh"].as_f64().unwrap();
    assert!((130.0..150.0).contains(&vmax), "{vmax}");
}
