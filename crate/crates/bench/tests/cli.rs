//! End-to-end checks of the `mngp` binary and of sweeps on disk.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mngp_bench::experiment::{run_and_persist, ExperimentSpec};

fn mngp(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mngp"))
        .args(args)
        .current_dir(cwd)
        .env_remove("MNGP_DATA_DIR")
        .output()
        .unwrap()
}

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = mngp(&["noise-check", "--sigma", "1", "--p", "50", "--zeta", "0.2", "--trials", "2000"], dir.path());
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));

    let out_of_regime = mngp(&["noise-check", "--sigma", "1", "--p", "4", "--zeta", "0.05"], dir.path());
    assert_eq!(out_of_regime.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out_of_regime.stderr).contains("regime"));

    let usage = mngp(&["run", "--no-such-flag"], dir.path());
    assert_eq!(usage.status.code(), Some(2));

    let missing = mngp(&["run", "--data", "nowhere.csv", "--label", "y"], dir.path());
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn ingest_reports_the_offending_row() {
    let dir = tempfile::tempdir().unwrap();
    let iris = data_dir().join("iris.csv");
    let out = mngp(&["ingest", iris.to_str().unwrap(), "--label", "species"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("non-binary"), "{err}");

    let out = mngp(
        &["ingest", iris.to_str().unwrap(), "--label", "species", "--one-vs-rest", "--out", "iris.json"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let cached: mngp::Dataset = serde_json::from_slice(&std::fs::read(dir.path().join("iris.json")).unwrap()).unwrap();
    assert_eq!((cached.n(), cached.p()), (150, 4));
}

#[test]
fn run_writes_trace_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = mngp(
        &[
            "run", "--synthetic", "strongly_convex_quadratic", "--n", "256", "--p", "4", "--optimizer", "mngp",
            "--trace", "t.csv", "--report", "r.json",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert!(trace.starts_with("t,"));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["n"], 256);
    // The default logistic loss has no closed-form population on this problem.
    assert!(report["excess_population_risk"].is_null());
    assert!(report["excess_empirical_risk"].as_f64().unwrap() >= 0.0);
    // One header line plus one line per iteration.
    assert_eq!(trace.lines().count() as u64, report["plan"]["iterations"].as_u64().unwrap() + 1);
}

fn sweep_spec(dir: &Path) -> PathBuf {
    let path = dir.join("sweep.toml");
    std::fs::write(
        &path,
        r#"
name = "tiny"
epsilons = [1.0]
seeds = 3
n_values = [200, 400]
plots = ["risk_vs_n"]

[dataset.synthetic]
kind = "strongly_convex_quadratic"
p = 3
seed = 1

[[arms]]
label = "tgp"
[arms.config]
optimizer = "tgp"
epsilon = 1.0
[arms.config.loss]
family = "least_squares"
lambda = 1.0

[[arms]]
label = "mngp"
[arms.config]
optimizer = "mngp"
schedule = "constant_hoelder"
epsilon = 1.0
[arms.config.loss]
family = "least_squares"
lambda = 1.0
"#,
    )
    .unwrap();
    path
}

#[test]
fn sweeps_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let spec = ExperimentSpec::load(&sweep_spec(dir.path())).unwrap();
    let a = run_and_persist(&spec, Some(&dir.path().join("a"))).unwrap();
    let b = run_and_persist(&spec, Some(&dir.path().join("b"))).unwrap();
    assert_eq!(a.failed(), 0);
    assert_eq!(a.reports.len(), 2 * 2 * 3);
    let read = |p: &Path| std::fs::read(p).unwrap();
    assert_eq!(read(&a.aggregate_path), read(&b.aggregate_path));
    assert_eq!(a.plot_paths.len(), 2);
    for (pa, pb) in a.plot_paths.iter().zip(&b.plot_paths) {
        assert_eq!(read(pa), read(pb));
    }
}

#[test]
fn sweep_cli_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let spec = sweep_spec(dir.path());
    let out = mngp(&["sweep", spec.to_str().unwrap(), "--output-dir", "out"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let aggregate = std::fs::read_to_string(dir.path().join("out/aggregate.csv")).unwrap();
    assert_eq!(aggregate.lines().count(), 1 + 12);
}
