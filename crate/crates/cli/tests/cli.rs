use std::fs;
use std::path::Path;
use std::process::Command;

use cachepart_cli::scenario::{OracleName, Scenario};
use cachepart_cli::table::{summary_header, trace_header};
use cachepart_cli::{builtin, figures, pipeline, run_to_dir, Overrides};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cachepart"))
}

fn first_line(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn every_builtin_round_trips() {
    for name in builtin::names() {
        let s = builtin::load(name).unwrap();
        let again = Scenario::parse(&s.to_toml()).unwrap();
        assert_eq!(again, s, "{name}");
    }
}

#[test]
fn golden_headers() {
    let dir = tempfile::tempdir().unwrap();
    let s = builtin::load("base-distinct-offline").unwrap();
    run_to_dir(&s, dir.path()).unwrap();
    assert_eq!(first_line(&dir.path().join("trace.csv")), "iteration,C1,C2,h1,h2,objective,converged");
    assert_eq!(
        first_line(&dir.path().join("summary.csv")),
        "label,C1,C2,h1,h2,aggregate_hit_probability,objective,reference_objective"
    );
    assert_eq!(trace_header(3, 2).join(","), "iteration,C1,C2,C3,h1,h2,objective,converged");
    assert_eq!(
        summary_header(3, 2).join(","),
        "label,C1,C2,C3,h1,h2,aggregate_hit_probability,objective,reference_objective"
    );
}

#[test]
fn base_scenario_gains_about_ten_percent() {
    let out = pipeline::run(&builtin::load("base-distinct-offline").unwrap()).unwrap();
    let w = out.summary.value("partitioned", "objective").unwrap();
    let base = out.summary.value("partitioned", "reference_objective").unwrap();
    assert_eq!(base, out.summary.value("shared", "objective").unwrap());
    let gain = (w - base) / base.abs();
    assert!((gain - 0.10).abs() <= 0.03, "gain {gain}");
    // The trace ends at the reported optimum.
    let last = out.trace.rows.last().unwrap();
    assert_eq!(last[out.trace.column("objective").unwrap()].as_f64().unwrap(), w);
}

#[test]
fn counterexample_has_two_rows() {
    let out = pipeline::run(&builtin::load("counterexample-s2-vs-s3").unwrap()).unwrap();
    assert_eq!(out.summary.rows.len(), 2);
    let s2 = out.summary.value("S2", "aggregate_hit_probability").unwrap();
    let s3 = out.summary.value("S3", "aggregate_hit_probability").unwrap();
    assert!((s2 - 0.816).abs() <= 0.005 && (s3 - 0.804).abs() <= 0.005, "{s2} {s3}");
}

#[test]
fn simulated_runs_are_byte_identical() {
    let mut s = builtin::load("online-distinct-log").unwrap();
    Overrides { max_iters: Some(4), ..Overrides::default() }.apply(&mut s);
    s.controller.as_mut().unwrap().window = 20_000;
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_to_dir(&s, a.path()).unwrap();
    run_to_dir(&s, b.path()).unwrap();
    for f in ["trace.csv", "summary.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    // A different seed changes the measurements.
    s.seed += 1;
    let c = tempfile::tempdir().unwrap();
    run_to_dir(&s, c.path()).unwrap();
    assert_ne!(fs::read(a.path().join("trace.csv")).unwrap(), fs::read(c.path().join("trace.csv")).unwrap());
}

#[test]
fn sweeps_are_deterministic() {
    let a = figures::reproduce("fig6", &Overrides::default()).unwrap();
    let b = figures::reproduce("fig6", &Overrides::default()).unwrap();
    assert_eq!(a[0].1.to_csv(), b[0].1.to_csv());
    assert_eq!(a[0].1.rows.len(), figures::ALPHA_GRID.len());
}

#[test]
fn grouped_exact_controller_settles() {
    let mut s = builtin::load("online-shared-log").unwrap();
    let c = s.controller.as_mut().unwrap();
    c.oracle = OracleName::Exact;
    c.schedule = cachepart_cli::scenario::ScheduleName::Constant;
    c.probe = 0.0;
    let out = pipeline::run(&s).unwrap();
    for p in ["C1", "C2", "C3"] {
        let got = out.summary.value("final", p).unwrap();
        let want = out.summary.value("optimum", p).unwrap();
        assert!((got - want).abs() <= 0.005 * s.capacity, "{p}: {got} vs {want}");
    }
}

#[test]
fn binary_runs_a_builtin_and_writes_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["run", "counterexample-s2-vs-s3", "--out-dir"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("summary.csv").exists() && dir.path().join("trace.csv").exists());
    let out = bin().args(["reproduce", "fig4a", "--out-dir"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("fig4a/fig4a.csv").exists());
    let out = bin().arg("list-scenarios").output().unwrap();
    assert!(String::from_utf8_lossy(&out.stdout).contains("base-distinct-offline"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    let text = builtin::text("base-distinct-offline").unwrap().replace("capacity = 10000.0", "capacity = -1.0");
    fs::write(&bad, text).unwrap();
    let out = bin().arg("validate").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`capacity`"));

    let garbled = dir.path().join("garbled.toml");
    fs::write(&garbled, "schema_version = [").unwrap();
    assert_eq!(bin().arg("run").arg(&garbled).output().unwrap().status.code(), Some(2));

    assert_eq!(bin().args(["reproduce", "fig42"]).output().unwrap().status.code(), Some(2));
    assert_eq!(bin().args(["run", "/nonexistent/scenario.toml"]).output().unwrap().status.code(), Some(4));

    // A controller that must converge in two iterations cannot.
    let strict = dir.path().join("strict.toml");
    let text = builtin::text("online-shared-log")
        .unwrap()
        .replace("oracle = \"simulated\"", "oracle = \"exact\"\nrequire_convergence = true");
    fs::write(&strict, text).unwrap();
    let out = bin().arg("run").arg(&strict).args(["--max-iters", "2", "--out-dir"]).arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("o/trace.csv").exists());
}
