//! `mflab` — command line runner for the experiment registry.
//!
//! Exit codes: 0 success, 2 configuration error, 3 divergence during a run,
//! 4 I/O failure. `MFLAB_THREADS` caps the worker pool.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mflab_core::error::Error;
use mflab_core::exp::{check_config, emit_outputs, registry, run_experiment, ExperimentConfig};
use mflab_core::parallel;

#[derive(Parser)]
#[command(name = "mflab", version, about = "Nonlinear-diffusion simulation lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a config file and write its outputs.
    Run {
        /// Path to a flat key-value config file.
        config: PathBuf,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: value of the config's `out` key, or
        /// `./out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Skip SVG figure emission.
        #[arg(long)]
        no_plots: bool,
    },
    /// List the experiment registry.
    List,
    /// Validate a config file without running it.
    Check { config: PathBuf },
}

fn main() -> ExitCode {
    parallel::configure_workers(None);
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::InvalidInput(_) => 2,
        Error::Divergence { .. } => 3,
        Error::Io(_) => 4,
        _ => 2,
    }
}

fn dispatch(cli: Cli) -> mflab_core::Result<()> {
    match cli.command {
        Command::List => {
            println!("available experiments:");
            for entry in registry() {
                println!("  {:<24} {}", entry.name, entry.summary);
            }
            Ok(())
        }
        Command::Check { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            check_config(&cfg)?;
            println!("ok: {} (seed {})", cfg.experiment, cfg.seed);
            Ok(())
        }
        Command::Run { config, seed, out, no_plots } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            check_config(&cfg)?;
            let out_dir = out.unwrap_or_else(|| PathBuf::from(cfg.get_str("out", "out")));
            let plots = !no_plots && cfg.get_str("plots", "true") != "false";
            let output = run_experiment(&cfg)?;
            let written = emit_outputs(&output, &cfg, &out_dir, plots)?;
            for path in written {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
    }
}
