use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sdhom::runner::{exit, run, write_report, ExperimentConfig, FieldSpec, RunManifest, SourceTerm, Stage};
use sdhom::Error;

#[derive(Parser)]
#[command(name = "sdhom", version, about = "Homogenization of monotone fields through selfdual Lagrangians")]
struct Cli {
    /// Experiment config (JSON); subcommand flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "sdhom-out")]
    out_dir: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for intra-stage parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    tol_gap: Option<f64>,
    #[arg(long, global = true)]
    tol_solve: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct FieldArg {
    /// Monotone field JSON.
    #[arg(long)]
    field: Option<PathBuf>,
}

#[derive(Args, Default)]
struct GridArgs {
    /// Cell grid nodes per axis.
    #[arg(long)]
    cell_nodes: Option<usize>,
    /// Half-width of the homogenized table box.
    #[arg(long)]
    ab_radius: Option<f64>,
    /// Nodes per axis of the homogenized table box.
    #[arg(long)]
    ab_nodes: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the growth and coercivity record of a field.
    Verify {
        #[command(flatten)]
        field: FieldArg,
    },
    /// Build and certify selfdual Lagrangian tables region by region.
    Selfdualize {
        #[command(flatten)]
        field: FieldArg,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        nodes: Option<usize>,
    },
    /// Evaluate the homogenized field at sample slopes.
    Cell {
        #[command(flatten)]
        field: FieldArg,
        #[arg(long)]
        cell_nodes: Option<usize>,
        /// Comma-separated slopes.
        #[arg(long, value_delimiter = ',')]
        xi: Option<Vec<f64>>,
    },
    /// Tabulate the homogenized Lagrangian.
    Tabulate {
        #[command(flatten)]
        field: FieldArg,
        #[command(flatten)]
        grid: GridArgs,
        /// Copy the table here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the Dirichlet problem with the oscillating Lagrangian.
    Solve {
        #[command(flatten)]
        field: FieldArg,
        /// `const:c`, `sin:k[:amp]` or `lin:c0,c1`.
        #[arg(long)]
        source: Option<String>,
        /// Intervals per axis.
        #[arg(long)]
        mesh: Option<usize>,
        /// The period is `1 / inverse_eps`.
        #[arg(long)]
        inverse_eps: Option<usize>,
        /// Copy the solve report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare oscillating and homogenized solves over a schedule of periods.
    Sweep {
        #[command(flatten)]
        field: FieldArg,
        #[arg(long)]
        source: Option<String>,
        /// Comma-separated values of `1/eps`.
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<usize>>,
        #[command(flatten)]
        grid: GridArgs,
        /// Copy the sweep CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the seeded property suites.
    Checks {
        #[arg(long)]
        cases: Option<usize>,
    },
    /// Run the pipeline of the config.
    Run,
    /// Render the report of a finished run in the output directory.
    Report,
}

fn apply_grid(cfg: &mut ExperimentConfig, g: &GridArgs) {
    if let Some(v) = g.cell_nodes {
        cfg.resolution.cell_nodes = v;
    }
    if let Some(v) = g.ab_radius {
        cfg.resolution.ab_radius = v;
    }
    if let Some(v) = g.ab_nodes {
        cfg.resolution.ab_nodes = v;
    }
}

fn apply_field(cfg: &mut ExperimentConfig, f: &FieldArg) -> Result<(), Error> {
    if let Some(p) = &f.field {
        let abs = std::path::absolute(p).map_err(|e| Error::Config {
            pointer: "/field".into(),
            message: e.to_string(),
        })?;
        cfg.field = Some(FieldSpec::Path(abs));
    }
    Ok(())
}

fn apply_source(cfg: &mut ExperimentConfig, s: &Option<String>) -> Result<(), Error> {
    if let Some(s) = s {
        cfg.source = s.parse::<SourceTerm>().map_err(|e| Error::Config {
            pointer: "/source".into(),
            message: e.to_string(),
        })?;
    }
    Ok(())
}

/// Build the config for a subcommand and the file to copy out afterwards.
fn configure(cli: &Cli) -> Result<(ExperimentConfig, PathBuf, Option<(String, PathBuf)>), Error> {
    let (mut cfg, base) = match &cli.config {
        Some(p) => (ExperimentConfig::load(p)?, p.parent().map(Path::to_path_buf).unwrap_or_default()),
        None => (ExperimentConfig::default(), PathBuf::from(".")),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.tol_gap {
        cfg.tolerances.tol_gap = t;
    }
    if let Some(t) = cli.tol_solve {
        cfg.tolerances.tol_solve = Some(t);
    }
    let mut copy = None;
    match &cli.command {
        Command::Verify { field } => {
            apply_field(&mut cfg, field)?;
            cfg.pipeline = vec![Stage::Verify];
        }
        Command::Selfdualize { field, radius, nodes } => {
            apply_field(&mut cfg, field)?;
            if let Some(r) = radius {
                cfg.resolution.selfdual_radius = *r;
            }
            if let Some(n) = nodes {
                cfg.resolution.selfdual_nodes = *n;
            }
            cfg.pipeline = vec![Stage::Selfdualize];
        }
        Command::Cell { field, cell_nodes, xi } => {
            apply_field(&mut cfg, field)?;
            if let Some(n) = cell_nodes {
                cfg.resolution.cell_nodes = *n;
            }
            if let Some(x) = xi {
                cfg.resolution.cell_samples = x.clone();
            }
            cfg.pipeline = vec![Stage::Cell];
        }
        Command::Tabulate { field, grid, out } => {
            apply_field(&mut cfg, field)?;
            apply_grid(&mut cfg, grid);
            cfg.pipeline = vec![Stage::Tabulate];
            copy = out.clone().map(|o| ("hom_table.json".to_string(), o));
        }
        Command::Solve {
            field,
            source,
            mesh,
            inverse_eps,
            out,
        } => {
            apply_field(&mut cfg, field)?;
            apply_source(&mut cfg, source)?;
            if let Some(m) = mesh {
                cfg.resolution.mesh = *m;
            }
            if let Some(k) = inverse_eps {
                cfg.resolution.solve_inverse_eps = *k;
            }
            cfg.pipeline = vec![Stage::Solve];
            copy = out.clone().map(|o| ("solve.json".to_string(), o));
        }
        Command::Sweep {
            field,
            source,
            eps,
            grid,
            out,
        } => {
            apply_field(&mut cfg, field)?;
            apply_source(&mut cfg, source)?;
            apply_grid(&mut cfg, grid);
            if let Some(e) = eps {
                cfg.resolution.eps = e.clone();
            }
            cfg.pipeline = vec![Stage::Tabulate, Stage::Solve, Stage::Sweep];
            copy = out.clone().map(|o| ("sweep.csv".to_string(), o));
        }
        Command::Checks { cases } => {
            if let Some(c) = cases {
                cfg.resolution.checks_cases = *c;
            }
            cfg.pipeline = vec![Stage::Checks];
        }
        Command::Run | Command::Report => {}
    }
    cfg.validate()?;
    Ok((cfg, base, copy))
}

fn print_manifest(m: &RunManifest) {
    for s in &m.stages {
        match &s.error {
            Some(e) => println!("{:<12} {:<6} {:>8} ms  {e}", s.stage.name(), s.status.label(), s.wall_ms),
            None => println!("{:<12} {:<6} {:>8} ms", s.stage.name(), s.status.label(), s.wall_ms),
        }
    }
}

fn main_inner(cli: &Cli) -> Result<i32, Error> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config {
                pointer: "/threads".into(),
                message: e.to_string(),
            })?;
    }
    if let Command::Report = cli.command {
        print!("{}", write_report(&cli.out_dir)?);
        return Ok(exit::PASS);
    }
    let (cfg, base, copy) = configure(cli)?;
    let manifest = run(&cfg, &base, &cli.out_dir)?;
    print_manifest(&manifest);
    write_report(&cli.out_dir)?;
    if let Some((name, dest)) = copy {
        let src = cli.out_dir.join(&name);
        if src.exists() {
            std::fs::copy(src, dest)?;
        }
    }
    Ok(manifest.exit_code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("sdhom: {e}");
            let code = match e {
                Error::SolverStalled { .. } => exit::SOLVER_STALL,
                Error::Report(_) => exit::CHECK_FAILURE,
                _ => exit::CONFIG_ERROR,
            };
            ExitCode::from(code as u8)
        }
    }
}
