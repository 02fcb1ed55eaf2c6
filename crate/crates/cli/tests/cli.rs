use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn quadsurf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quadsurf")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn ring_measure(dir: &Path) -> String {
    let p = dir.join("ring.json");
    fs::write(
        &p,
        r#"{"dim": 2, "uniform_circles": [{"center": [0.0, 0.0], "radius": 0.25, "total_mass": 6.283185307179586}]}"#,
    )
    .unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn oracle_writes_listed_files() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("oracle");
    let o = quadsurf(&["oracle", "--rho", "0.25", "--R", "1.0", "--grid", "32", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = json(&out.join("manifest.json"));
    let files: Vec<&str> = m["files"].as_array().unwrap().iter().map(|f| f.as_str().unwrap()).collect();
    for f in ["field.json", "field.f64", "mask.json", "mask.f64", "body.json"] {
        assert!(files.contains(&f), "{f} not in {files:?}");
        assert!(out.join(f).exists());
    }
    let side = json(&out.join("field.json"));
    assert_eq!(side["endianness"], "little");
    let n = side["nx"].as_u64().unwrap() * side["ny"].as_u64().unwrap();
    assert_eq!(fs::metadata(out.join("field.f64")).unwrap().len(), 8 * n);
    assert!(!out.join(".quadsurf.lock").exists());
}

#[test]
fn oracle_rejects_bad_parameters() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let out = out.to_str().unwrap();
    assert_eq!(code(&quadsurf(&["oracle", "--rho", "1.0", "--R", "1.0", "--grid", "32", "--out", out])), 2);
    assert_eq!(code(&quadsurf(&["oracle", "--rho", "0.25", "--R", "1.0", "--grid", "8", "--out", out])), 2);
}

#[test]
fn solve_converges_then_verifies() {
    let tmp = tempfile::tempdir().unwrap();
    let measure = ring_measure(tmp.path());
    let run = tmp.path().join("run");
    let o = quadsurf(&["solve", "--measure", &measure, "--grid", "48", "--init", "1.3", "--out", run.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&run.join("residual.json"));
    assert_eq!(r["converged"], true);
    assert!((r["mean_radius"].as_f64().unwrap() - 1.0).abs() < 2e-2);
    let history = fs::read_to_string(run.join("history.csv")).unwrap();
    assert!(history.starts_with("iter,max_res,mean_res\n"));

    let v = tmp.path().join("verify");
    let o = quadsurf(&["verify", "--run", run.to_str().unwrap(), "--out", v.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&v.join("report.json"));
    let claims = report["claims"].as_array().unwrap();
    assert_eq!(claims.len(), 10);
    // A single resolution is never enough to refute.
    assert!(claims.iter().all(|c| c["verdict"] != "REFUTED"));
}

#[test]
fn solve_stops_at_iteration_cap() {
    let tmp = tempfile::tempdir().unwrap();
    let measure = ring_measure(tmp.path());
    let run = tmp.path().join("run");
    let o = quadsurf(&["solve", "--measure", &measure, "--grid", "32", "--max-iter", "1", "--out", run.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    let history = fs::read_to_string(run.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 2);
    assert!(run.join("field.json").exists());
}

#[test]
fn solve_needs_measure_file() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.json");
    let out = tmp.path().join("run");
    let o = quadsurf(&["solve", "--measure", missing.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn verify_oracle_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for d in [&a, &b] {
        let o = quadsurf(&["verify", "--scenario", "oracle-annulus", "--grids", "32,48", "--out", d.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["report.json", "thickness.csv", "contours.csv", "manifest.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let report = json(&a.join("report.json"));
    assert_eq!(report["claims"].as_array().unwrap().len(), 10);
    let svg = fs::read_to_string(a.join("contours.svg")).unwrap();
    assert!(svg.contains(r#"data-level="0.2""#));
    let csv = fs::read_to_string(a.join("contours.csv")).unwrap();
    assert!(csv.starts_with("level,component_id,vertex_id,x,y\n"));
}

#[test]
fn verify_rejects_unknown_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("v");
    assert_eq!(code(&quadsurf(&["verify", "--scenario", "torus", "--out", out.to_str().unwrap()])), 2);
}

#[test]
fn verify_reports_unwritable_output() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "").unwrap();
    let out = blocker.join("v");
    let o = quadsurf(&["verify", "--scenario", "oracle-annulus", "--grids", "32,48", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 4);
}

#[test]
fn locked_output_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("v");
    fs::create_dir(&out).unwrap();
    fs::write(out.join(".quadsurf.lock"), "").unwrap();
    let o = quadsurf(&["verify", "--scenario", "oracle-annulus", "--grids", "32,48", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 4);
    assert!(out.join(".quadsurf.lock").exists());
    assert!(!out.join("report.json").exists());
}

#[test]
fn sweep_has_one_row_per_claim_and_point() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("s");
    let o = quadsurf(&["sweep", "--rho", "0.2,0.25", "--R", "1", "--grids", "32,48", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "claim_id,rho,R,grid,residual_max,residual_mean,level,residual_at_level,verdict"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 40);
    assert_eq!(rows.iter().filter(|r| r.starts_with("parallel-levels,")).count(), 4);
}

#[test]
fn sweep_rejects_empty_parameters() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("s");
    assert_eq!(code(&quadsurf(&["sweep", "--rho", "", "--out", out.to_str().unwrap()])), 2);
}

#[test]
fn thread_cap_must_be_positive() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let o = Command::new(env!("CARGO_BIN_EXE_quadsurf"))
        .args(["oracle", "--rho", "0.25", "--R", "1", "--grid", "16", "--out", out.to_str().unwrap()])
        .env("QUADSURF_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}
