//! `gode` command-line front end: config parsing, workflows and batch runs.

pub mod commands;
pub mod config;
pub mod setup;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

pub use commands::{Artifacts, Command, RunError, Status};
use config::RunConfig;
use setup::Overrides;

#[derive(Debug, Parser)]
#[command(name = "gode", version, about = "Gauge-integral solvers for generalized ODEs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Solve a problem by refining tangent-curve Euler partitions.
    Solve(RunArgs),
    /// Evaluate a Stieltjes-Henstock-Kurzweil integral.
    Integrate(RunArgs),
    /// Run sampled condition checks (osgood, class_f, weak_class, u_conditions, equiregulated).
    Check(RunArgs),
    /// Tabulate defect and node error for every refinement level.
    Convergence(RunArgs),
    /// Sample the uniqueness functional along two paths.
    Monitor(RunArgs),
}

impl Sub {
    fn split(&self) -> (Command, &RunArgs) {
        match self {
            Sub::Solve(a) => (Command::Solve, a),
            Sub::Integrate(a) => (Command::Integrate, a),
            Sub::Check(a) => (Command::Check, a),
            Sub::Convergence(a) => (Command::Convergence, a),
            Sub::Monitor(a) => (Command::Monitor, a),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// JSON config files; several files run as an independent batch.
    #[arg(required = true)]
    pub configs: Vec<PathBuf>,
    /// Convergence tolerance, overriding the config.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Number of refinement levels, overriding the config.
    #[arg(long)]
    pub levels: Option<u32>,
    /// Seed for randomized sampling, overriding the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory for `<config>.<command>.json` and `.csv` artifacts.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// What to print on stdout.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Worker threads for batch runs; 0 uses all cores.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

/// Result of one config in a batch.
#[derive(Debug)]
pub struct Outcome {
    pub config: PathBuf,
    pub result: Result<Artifacts, RunError>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match &self.result {
            Ok(a) if a.status == Status::Success => 0,
            Ok(_) | Err(RunError::Compute(_)) => 2,
            Err(RunError::Input(_)) => 1,
        }
    }
}

fn stem(path: &Path) -> Result<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_owned)
        .ok_or_else(|| anyhow!("cannot derive an output name from {}", path.display()))
}

fn run_one(cmd: Command, path: &Path, args: &RunArgs) -> Result<Artifacts, RunError> {
    let cfg = RunConfig::load(path).map_err(RunError::Input)?;
    let overrides = Overrides {
        tol: args.tol,
        levels: args.levels,
        seed: args.seed,
    };
    let artifacts = commands::run_config(cmd, &cfg, overrides)?;
    if let Some(dir) = &args.out {
        let name = stem(path).map_err(RunError::Input)?;
        let write = |ext: &str, body: &str| {
            let p = dir.join(format!("{name}.{}.{ext}", cmd.name()));
            std::fs::write(&p, body).with_context(|| format!("cannot write {}", p.display()))
        };
        write("json", &artifacts.json).map_err(RunError::Input)?;
        write("csv", &artifacts.csv).map_err(RunError::Input)?;
    }
    Ok(artifacts)
}

/// Run every config of a batch, in parallel when `jobs != 1`. Outcomes keep
/// the order of `args.configs`.
pub fn execute(cmd: Command, args: &RunArgs) -> Result<Vec<Outcome>> {
    let mut stems = std::collections::BTreeSet::new();
    for p in &args.configs {
        if !stems.insert(stem(p)?) {
            bail!("two configs share the output name of {}", p.display());
        }
    }
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .context("cannot start worker threads")?;
    Ok(pool.install(|| {
        args.configs
            .par_iter()
            .map(|p| Outcome {
                config: p.clone(),
                result: run_one(cmd, p, args),
            })
            .collect()
    }))
}

/// Batch exit code: input errors win over non-convergence.
pub fn exit_code(outcomes: &[Outcome]) -> i32 {
    let codes: Vec<i32> = outcomes.iter().map(Outcome::exit_code).collect();
    if codes.contains(&1) {
        1
    } else if codes.contains(&2) {
        2
    } else {
        0
    }
}

/// Parse `argv`, run, print and return the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (cmd, args) = cli.command.split();
    let outcomes = match execute(cmd, args) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return 1;
        }
    };
    let batch = outcomes.len() > 1;
    for o in &outcomes {
        match &o.result {
            Ok(a) => {
                if batch {
                    println!("# {}", o.config.display());
                }
                match args.format {
                    Format::Json => print!("{}", a.json),
                    Format::Csv => print!("{}", a.csv),
                }
                eprintln!("{}: {}", o.config.display(), commands::headline(cmd, a));
            }
            Err(e) => eprintln!("{}: {e}", o.config.display()),
        }
    }
    exit_code(&outcomes)
}
