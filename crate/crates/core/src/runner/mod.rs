//! Experiment configs, the stage pipeline, run manifests and reports.

mod config;
mod report;
mod source;
mod stages;

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use config::{ExperimentConfig, FieldSpec, Resolution, Stage, Tolerances};
pub use report::{render_report, write_report};
pub use source::SourceTerm;
pub use stages::{power_oracle, CellArtifact, CellRow, SolveArtifact};

use crate::cell::ResidualSidecar;
use crate::checks::ChecksReport;
use crate::convex::TabulatedFunction;
use crate::error::{Error, Result};
use crate::harness::SweepReport;

pub const MANIFEST: &str = "manifest.json";

/// Exit codes of the command-line runner.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const CHECK_FAILURE: i32 = 1;
    pub const CONFIG_ERROR: i32 = 2;
    pub const SOLVER_STALL: i32 = 3;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Pass,
    Fail,
    /// The stage aborted; later stages were skipped.
    Error,
    Stalled,
}

impl StageStatus {
    pub fn label(self) -> &'static str {
        match self {
            StageStatus::Pass => "PASS",
            StageStatus::Fail => "FAIL",
            StageStatus::Error => "ERROR",
            StageStatus::Stalled => "STALL",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub status: StageStatus,
    pub wall_ms: u64,
    /// Paths relative to the output directory.
    pub artifacts: Vec<String>,
    pub summary: Value,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub name: String,
    pub config_hash: String,
    pub version: String,
    pub seed: u64,
    pub threads: usize,
    pub stages: Vec<StageRecord>,
    pub exit_code: i32,
}

impl RunManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::Report(format!("{}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn passed(&self) -> bool {
        self.exit_code == exit::PASS
    }

    /// The manifest with wall times zeroed, for comparing runs.
    pub fn without_timings(&self) -> RunManifest {
        let mut m = self.clone();
        m.threads = 0;
        for s in &mut m.stages {
            s.wall_ms = 0;
        }
        m
    }
}

fn exit_code(stages: &[StageRecord]) -> i32 {
    if stages.iter().any(|s| s.status == StageStatus::Stalled) {
        exit::SOLVER_STALL
    } else if stages.iter().any(|s| s.status != StageStatus::Pass) {
        exit::CHECK_FAILURE
    } else {
        exit::PASS
    }
}

/// Run every stage of `config` in order, writing artifacts and
/// `manifest.json` into `out`. Relative field paths are read against
/// `base`. Config problems are returned as [`Error::Config`]; stage failures
/// are recorded in the manifest, and a stage that aborts stops the run.
pub fn run(config: &ExperimentConfig, base: &Path, out: &Path) -> Result<RunManifest> {
    config.validate()?;
    let field = config.load_field(base)?;
    let table = if field.is_none() { config.load_lagrangian_table(base)? } else { None };
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("config.json"), serde_json::to_string_pretty(config)?)?;
    let mut ctx = stages::Context::new(config, out, field, table);
    let mut records = Vec::new();
    for &stage in &config.pipeline {
        let t = Instant::now();
        let outcome = ctx.run(stage);
        let wall_ms = t.elapsed().as_millis() as u64;
        let (record, abort) = match outcome {
            Ok(o) => (
                StageRecord {
                    stage,
                    status: if o.stalled {
                        StageStatus::Stalled
                    } else if o.passed {
                        StageStatus::Pass
                    } else {
                        StageStatus::Fail
                    },
                    wall_ms,
                    artifacts: o.artifacts,
                    summary: o.summary,
                    error: None,
                },
                false,
            ),
            Err(e) => (
                StageRecord {
                    stage,
                    status: if matches!(e, Error::SolverStalled { .. }) { StageStatus::Stalled } else { StageStatus::Error },
                    wall_ms,
                    artifacts: Vec::new(),
                    summary: Value::Null,
                    error: Some(e.to_string()),
                },
                true,
            ),
        };
        records.push(record);
        if abort {
            break;
        }
    }
    let manifest = RunManifest {
        name: config.name.clone(),
        config_hash: config.hash(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed,
        threads: rayon::current_num_threads(),
        exit_code: exit_code(&records),
        stages: records,
    };
    std::fs::write(out.join(MANIFEST), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

fn round_trip<T: Serialize + for<'de> Deserialize<'de>>(text: &str) -> Result<()> {
    let first: T = serde_json::from_str(text)?;
    let once = serde_json::to_string(&first)?;
    let second: T = serde_json::from_str(&once)?;
    if serde_json::to_string(&second)? != once {
        return Err(Error::Report("artifact does not round-trip".into()));
    }
    Ok(())
}

/// Check that every artifact named in the manifest exists and parses back
/// through its schema.
pub fn verify_artifacts(dir: &Path) -> Result<()> {
    let manifest = RunManifest::load(dir)?;
    for stage in &manifest.stages {
        for name in &stage.artifacts {
            let path = dir.join(name);
            let text = std::fs::read_to_string(&path).map_err(|e| Error::Report(format!("missing artifact {}: {e}", path.display())))?;
            let checked = match name.as_str() {
                "sweep.csv" => {
                    if text.lines().next() == Some(crate::harness::SWEEP_CSV_HEADER) {
                        Ok(())
                    } else {
                        Err(Error::Report("sweep.csv header mismatch".into()))
                    }
                }
                "sweep.json" => round_trip::<SweepReport>(&text),
                "checks.json" => round_trip::<ChecksReport>(&text),
                "cell.json" => round_trip::<CellArtifact>(&text),
                "solve.json" | "solve_hom.json" => round_trip::<SolveArtifact>(&text),
                "hom_table.residuals.json" => round_trip::<ResidualSidecar>(&text),
                n if n == "hom_table.json" || n.starts_with("selfdual_r") => {
                    let t = TabulatedFunction::from_json(&text)?;
                    let back = TabulatedFunction::from_json(&t.to_json()?)?;
                    if back.values().iter().zip(t.values()).all(|(a, b)| a == b || (a.is_nan() && b.is_nan())) {
                        Ok(())
                    } else {
                        Err(Error::Report(format!("{name} does not round-trip")))
                    }
                }
                _ => round_trip::<Value>(&text),
            };
            checked.map_err(|e| Error::Report(format!("{name}: {e}")))?;
        }
    }
    Ok(())
}
