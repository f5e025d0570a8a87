//! `saturate`: thresholds, coupled runs and invariant checks for vector
//! density-evolution systems, driven by a JSON configuration.

mod commands;
mod config;
mod failure;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use saturate_core::Exec;

use crate::failure::Failure;
use crate::output::Sink;

#[derive(Parser)]
#[command(name = "saturate", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// BP, potential and Maxwell thresholds plus the energy-gap curve.
    Threshold(RunArgs),
    /// Coupled-chain runs, profiles and the coupling-width bound.
    Coupled(RunArgs),
    /// Admissibility checks and the inequality battery.
    Verify(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory, overriding the one in the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn executor(jobs: Option<usize>) -> Result<Exec, Failure> {
    match jobs {
        Some(0) => Err(Failure::Config("--jobs must be at least 1".into())),
        Some(1) => Ok(Exec::Sequential),
        #[cfg(feature = "parallel")]
        Some(n) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Failure::Config(format!("thread pool: {e}")))?;
            Ok(Exec::Parallel)
        }
        #[cfg(not(feature = "parallel"))]
        Some(_) => Ok(Exec::Sequential),
        None => Ok(Exec::default()),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let (name, args) = match &cli.command {
        Command::Threshold(a) => ("threshold", a),
        Command::Coupled(a) => ("coupled", a),
        Command::Verify(a) => ("verify", a),
    };
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Failure::Config(format!("{}: {e}", args.config.display())))?;
    let cfg = config::load(&text)?;
    let exec = executor(args.jobs)?;
    let sink = Sink::new(args.out.as_ref().unwrap_or(&cfg.config.output.dir))?;
    log::info!("{name} with config {} ({})", args.config.display(), cfg.hash);
    match cli.command {
        Command::Threshold(_) => commands::threshold(&cfg, &sink, exec),
        Command::Coupled(_) => commands::coupled(&cfg, &sink, exec),
        Command::Verify(_) => commands::verify(&cfg, &sink, exec),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SATURATE_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("saturate: {f}");
            f.exit_code()
        }
    }
}
