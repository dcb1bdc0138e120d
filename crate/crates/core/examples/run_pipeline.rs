//! Run a config through the stage pipeline and print the report.

use std::path::Path;

use sdhom::runner::{run, write_report, ExperimentConfig};

fn main() -> sdhom::Result<()> {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let path = std::env::args().nth(1).map_or_else(|| configs.join("twophase_linear.json"), Into::into);
    let cfg = ExperimentConfig::load(&path)?;
    let out = std::env::temp_dir().join("sdhom-example");
    let base = path.parent().unwrap_or(Path::new("."));
    let manifest = run(&cfg, base, &out)?;
    print!("{}", write_report(&out)?);
    println!("artifacts in {}, exit code {}", out.display(), manifest.exit_code);
    Ok(())
}
