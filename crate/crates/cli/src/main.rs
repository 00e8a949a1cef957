//! Batch front-end: parse a run configuration, orchestrate the audit,
//! solver and simulators, and emit CSVs plus a verification report.
//!
//! Exit status: 0 all checks passed, 1 a check or integration failed,
//! 2 configuration error.

mod config;
mod pipeline;
mod report;

use clap::{Args, Parser, Subcommand};
use pipeline::{CliError, Pipeline};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "mvfpke",
    about = "Nonlinear Fokker-Planck solver with linearized and mean-field SDE simulators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Audit the structural hypotheses on a sampling lattice
    CheckConditions(CommonArgs),
    /// Solve the equation and check conservation, positivity and bounds
    SolveFpke(CommonArgs),
    /// Run the frozen-coefficient ensemble, gap study and particle system
    Simulate(CommonArgs),
    /// Full pipeline: audit, solve, simulate, one merged report
    Verify(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration (flat key = value file)
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides output.dir from the config)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace every stochastic seed in the config
    #[arg(long)]
    seed_override: Option<u64>,
    /// Suppress the stdout echo of check lines
    #[arg(long)]
    quiet: bool,
}

fn run(command: &Command) -> Result<bool, CliError> {
    let args = match command {
        Command::CheckConditions(a)
        | Command::SolveFpke(a)
        | Command::Simulate(a)
        | Command::Verify(a) => a,
    };
    let mut cfg = config::load_config(&args.config)?;
    if let Some(seed) = args.seed_override {
        cfg.override_seeds(seed);
    }
    let mut pipe = Pipeline::new(cfg, args.out.clone())?;
    match command {
        Command::CheckConditions(_) => {
            pipe.run_conditions()?;
        }
        Command::SolveFpke(_) => {
            pipe.run_solve(true)?;
        }
        Command::Simulate(_) => {
            let sol = pipe.run_solve(false)?;
            pipe.run_simulate(&sol)?;
        }
        Command::Verify(_) => {
            if pipe.cfg().checks.conditions {
                pipe.run_conditions()?;
            }
            let sol = pipe.run_solve(true)?;
            pipe.run_simulate(&sol)?;
        }
    }
    let passed = pipe.finalize(args.quiet)?;
    if !args.quiet {
        println!("report: {}", pipe.out_dir().join("report.txt").display());
    }
    Ok(passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e @ CliError::Config(_)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
