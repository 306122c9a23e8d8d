//! `nestfus`: harmonics of focused ultrasound fields on nested voxel meshes.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod checks;
mod commands;
mod config;
mod error;
mod output;

use clap::{Parser, Subcommand};

use config::RunArgs;
use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "nestfus", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute the harmonics and write on-axis profiles, timings and a manifest.
    Simulate(RunArgs),
    /// Print the nested mesh plan without computing anything.
    Plan(RunArgs),
    /// Run a quadrature or domain-size convergence study.
    Converge {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        study: commands::ConvergeArgs,
    },
    /// Run the built-in numerical self-checks.
    Validate {
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn init_threads(n: Option<usize>) -> CliResult<()> {
    if let Some(n) = n {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start {n} threads: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate(args) => {
            let cfg = args.resolve()?;
            init_threads(cfg.threads)?;
            commands::simulate(&cfg)
        }
        Command::Plan(args) => {
            let cfg = args.resolve()?;
            commands::plan(&cfg)
        }
        Command::Converge { run, study } => {
            let cfg = run.resolve()?;
            init_threads(cfg.threads)?;
            commands::converge(&cfg, &study)
        }
        Command::Validate { threads } => {
            let threads = match threads {
                Some(n) => Some(n),
                None => std::env::var(config::THREADS_ENV).ok().and_then(|v| v.parse().ok()),
            };
            init_threads(threads)?;
            match commands::validate()? {
                0 => Ok(()),
                n => Err(CliError::Runtime(nestfus::Error::DegenerateField(format!("{n} self-check(s) failed")))),
            }
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
