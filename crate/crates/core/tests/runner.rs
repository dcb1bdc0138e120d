use std::path::{Path, PathBuf};
use std::process::Command;

use sdhom::runner::{render_report, run, verify_artifacts, write_report, CellArtifact, ExperimentConfig, RunManifest, SolveArtifact, StageStatus};
use sdhom::Error;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(text).unwrap()
}

#[test]
fn golden_run_is_deterministic_and_hits_the_harmonic_mean() {
    let cfg = ExperimentConfig::load(&configs().join("twophase_linear.json")).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let m1 = run(&cfg, &configs(), a.path()).unwrap();
    assert_eq!(m1.stages.len(), 6);
    assert!(m1.stages.iter().all(|s| s.status == StageStatus::Pass), "{:#?}", m1.stages);
    assert_eq!(m1.exit_code, 0);
    verify_artifacts(a.path()).unwrap();

    // harmonic mean of 1 and 4 on equal halves
    let oracle = 1.0 / (0.5 / 1.0 + 0.5 / 4.0);
    let cell: CellArtifact = serde_json::from_str(&std::fs::read_to_string(a.path().join("cell.json")).unwrap()).unwrap();
    let last = cell.rows.last().unwrap();
    assert!((last.coefficient - oracle).abs() <= 1e-3, "{}", last.coefficient);
    let text = write_report(a.path()).unwrap();
    assert!(text.contains("a_hom = 1.600"), "{text}");

    let m2 = run(&cfg, &configs(), b.path()).unwrap();
    assert_eq!(m1.without_timings(), m2.without_timings());
    assert_eq!(render_report(a.path()).unwrap(), render_report(b.path()).unwrap());
}

#[test]
fn empty_pipeline_writes_an_empty_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let m = run(&config("{}"), Path::new("."), dir.path()).unwrap();
    assert!(m.stages.is_empty());
    assert_eq!(m.exit_code, 0);
    assert_eq!(RunManifest::load(dir.path()).unwrap(), m);
    verify_artifacts(dir.path()).unwrap();
}

#[test]
fn config_errors_carry_pointers() {
    let ptr = |t: &str| match ExperimentConfig::from_json(t) {
        Err(Error::Config { pointer, .. }) => pointer,
        other => panic!("{other:?}"),
    };
    assert_eq!(ptr(r#"{"pipeline": ["cell"]}"#), "/pipeline/0");
    assert_eq!(ptr(r#"{"tolerances": {"tol_solve": 0}}"#), "/tolerances/tol_solve");
    let bad_field = r#"{"field": {"kind": "linear", "regions": [{"params": {}}], "growth": {"c1": 1, "c2": 1, "p": 2}}, "pipeline": ["verify"]}"#;
    let cfg = config(bad_field);
    let dir = tempfile::tempdir().unwrap();
    match run(&cfg, Path::new("."), dir.path()) {
        Err(Error::Config { pointer, .. }) => assert_eq!(pointer, "/field/regions/0/params"),
        other => panic!("{other:?}"),
    }
}

fn loose_cell_config(pipeline: &str) -> ExperimentConfig {
    // a cell tolerance of 0.3 stops the cell solver far from the corrector
    config(&format!(
        r#"{{"field": "{}", "pipeline": {pipeline}, "tolerances": {{"tol_cell": 0.3}},
            "resolution": {{"cell_nodes": 32, "ab_radius": 1.0, "ab_nodes": 17, "mesh": 64}}}}"#,
        configs().join("fields/twophase_linear.json").display()
    ))
}

#[test]
fn failed_stage_is_reported_and_tables_kept() {
    let dir = tempfile::tempdir().unwrap();
    let m = run(&loose_cell_config(r#"["cell"]"#), Path::new("."), dir.path()).unwrap();
    assert_eq!(m.stages[0].status, StageStatus::Fail);
    assert_eq!(m.exit_code, 1);
    let report = write_report(dir.path()).unwrap();
    assert!(report.contains("cell         FAIL"), "{report}");
    assert!(report.contains("== cell: beta_hom samples"), "{report}");
    std::fs::remove_file(dir.path().join("cell.json")).unwrap();
    assert!(matches!(render_report(dir.path()), Err(Error::Report(_))));
}

#[test]
fn uncertified_solve_is_a_stall() {
    // the inaccurate table is not selfdual enough for a gap below tol_solve
    let dir = tempfile::tempdir().unwrap();
    let m = run(&loose_cell_config(r#"["tabulate", "solve", "sweep"]"#), Path::new("."), dir.path()).unwrap();
    assert_eq!(m.stages.len(), 2);
    assert_eq!(m.stages[1].status, StageStatus::Stalled);
    assert_eq!(m.exit_code, 3);
}

#[test]
fn growth_violation_stops_the_run() {
    // c1 = 4 asks for <xi, xi> >= 2 |xi|^2
    let text = r#"{"field": {"kind": "linear", "regions": [{"params": {"a": 1.0}}], "growth": {"c1": 4, "c2": 1, "p": 2}},
                   "pipeline": ["verify", "cell"]}"#;
    let dir = tempfile::tempdir().unwrap();
    let m = run(&config(text), Path::new("."), dir.path()).unwrap();
    assert_eq!(m.stages.len(), 1);
    assert_eq!(m.stages[0].status, StageStatus::Error);
    assert_eq!(m.exit_code, 1);
}

#[test]
fn cli_solve_and_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_sdhom");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let status = Command::new(bin)
        .args(["--out-dir"])
        .arg(dir.path().join("run"))
        .args(["solve", "--field"])
        .arg(configs().join("fields/uniform_linear.json"))
        .args(["--source", "const:1", "--mesh", "64", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    for key in ["gap", "energy", "u", "f", "iterations", "wall_time_ms"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    // -u'' = 1 with zero boundary values
    let r: SolveArtifact = serde_json::from_str(&text).unwrap();
    let h = 1.0 / 64.0;
    let err = r.u.iter().enumerate().map(|(i, u)| {
        let x = (i + 1) as f64 * h;
        (u - x * (1.0 - x) / 2.0).abs()
    });
    assert!(err.fold(0.0, f64::max) <= 1e-6);

    let bad = Command::new(bin).args(["--out-dir"]).arg(dir.path().join("bad")).args(["--tol-gap=-1", "checks"]).status().unwrap();
    assert_eq!(bad.code(), Some(2));
    let no_field = Command::new(bin).args(["--out-dir"]).arg(dir.path().join("nf")).arg("cell").status().unwrap();
    assert_eq!(no_field.code(), Some(2));
}
