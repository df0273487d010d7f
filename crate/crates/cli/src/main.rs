//! `sobolev`: configuration-driven Monte Carlo Euler experiments.
//!
//! Exit status: 0 when every embedded assertion holds, 1 on a failed
//! assertion, 2 on configuration errors, 3 on numerical divergence.

mod commands;
mod config;
mod error;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::report::loglog_svg;

/// Environment variable holding the number of worker threads.
const WORKERS_ENV: &str = "SOBOLEV_WORKERS";

#[derive(Parser)]
#[command(name = "sobolev", version, about = "Monte Carlo Euler experiments for linear parabolic PDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML experiment configuration.
    #[arg(short, long)]
    config: PathBuf,
    /// Output directory; overrides `run.output_dir`.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Also write log-log SVG plots for the sweeps.
    #[arg(long)]
    plot: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate u(0, x), optionally with its gradient, and compare with the exact solution.
    Solve(RunArgs),
    /// Sample and step counts meeting an error target with a given confidence.
    Plan(RunArgs),
    /// Weak error against the number of time steps, with common random numbers.
    ConvergeN(RunArgs),
    /// Standard error against the number of samples.
    ConvergeM(RunArgs),
    /// L² errors of value and gradient over a compact domain.
    Sobolev(RunArgs),
    /// Coupled perturbation gap and pathwise perturbation bounds.
    Perturb(RunArgs),
    /// Growth calculus inequalities on the fixture battery.
    GrowthCheck(RunArgs),
    /// Export a frozen realization as a network and verify it.
    NnExport(RunArgs),
}

impl Command {
    fn split(self) -> (&'static str, RunArgs) {
        match self {
            Command::Solve(a) => ("solve", a),
            Command::Plan(a) => ("plan", a),
            Command::ConvergeN(a) => ("converge-n", a),
            Command::ConvergeM(a) => ("converge-m", a),
            Command::Sobolev(a) => ("sobolev", a),
            Command::Perturb(a) => ("perturb", a),
            Command::GrowthCheck(a) => ("growth-check", a),
            Command::NnExport(a) => ("nn-export", a),
        }
    }
}

fn configure_workers() -> Result<(), CliError> {
    let Ok(v) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("{WORKERS_ENV} must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot start {n} workers: {e}")))
}

fn execute(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    configure_workers()?;
    let (name, args) = cli.command.split();
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(out) = args.out {
        cfg.run.output_dir = out;
    }
    cfg.run.plot |= args.plot;
    let dir = cfg.run.output_dir.clone();
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join(format!("{name}.resolved.toml")), cfg.resolved(name)?)?;

    let outcome = commands::run(name, &cfg, &dir)?;
    let mut written = Vec::new();
    for t in &outcome.tables {
        written.push(t.write(&dir)?);
    }
    if cfg.run.plot {
        for plot in &outcome.plots {
            let path = dir.join(format!("{}.svg", plot.stem));
            loglog_svg(&path, &plot.title, &plot.x_label, &plot.points, plot.fit)?;
            written.push(path);
        }
    }
    if !outcome.failures.is_empty() {
        return Err(CliError::Assertion(outcome.failures.join("; ")));
    }
    Ok(written)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("sobolev: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
