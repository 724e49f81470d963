//! `hshadow`: config-driven Hamiltonian-shadow experiments.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 config or usage error,
//! 3 incomplete Hamiltonian, 4 snapshot fingerprint mismatch.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::RunOptions;
use error::CliError;

#[derive(Parser)]
#[command(name = "hshadow", version, about = "Simulate and analyze Hamiltonian-shadow experiments")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Experiment config (TOML, `version = 1`).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Overrides the config shot count.
    #[arg(long, global = true, value_name = "K")]
    shots: Option<usize>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, value_name = "T")]
    threads: Option<usize>,
    /// Fall back to the pseudo-inverse instead of aborting on an incomplete Hamiltonian.
    #[arg(long, global = true)]
    allow_incomplete: bool,
    /// Invert the finite-window shadow map instead of the ideal one.
    #[arg(long, global = true)]
    finite_time: bool,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample snapshots and write them with a manifest.
    Simulate,
    /// Estimate the configured observables from a snapshot file.
    Estimate {
        /// Snapshot file; defaults to `snapshots.txt` in the output directory.
        #[arg(long, value_name = "PATH")]
        snapshots: Option<PathBuf>,
    },
    /// Exact, approximate and empirical estimator variances.
    Variance,
    /// Frame potentials of the configured phase distribution.
    FramePotential,
    /// Print the tomographic-completeness diagnosis.
    Diagnose,
    /// Write the desk-scale data series of a figure.
    Reproduce {
        /// fig3a, fig3b, fig4b, fig4c, fig4d, fig6, fig8, fig10, fig12, fig13 or all.
        figure: String,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let g = cli.global;
    if let Some(t) = g.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads {t}: {e}")))?;
    }
    let opts = RunOptions {
        config: g.config,
        seed: g.seed,
        shots: g.shots,
        out: g.out,
        allow_incomplete: g.allow_incomplete,
        finite_time: g.finite_time,
    };
    match cli.command {
        Command::Simulate => println!("{}", commands::simulate(&opts)?.display()),
        Command::Estimate { snapshots } => println!("{}", commands::estimate(&opts, snapshots.as_deref())?.display()),
        Command::Variance => println!("{}", commands::variance(&opts)?.display()),
        Command::FramePotential => println!("{}", commands::frame_potential(&opts)?.display()),
        Command::Diagnose => print!("{}", commands::diagnose(&opts)?),
        Command::Reproduce { figure } => {
            for path in commands::reproduce_figures(&opts, &figure)? {
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hshadow: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
