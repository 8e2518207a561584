//! Thin command-line wrapper around [`elastoscat::cli`].

use clap::{Parser, Subcommand};
use elastoscat::cli::{self, CliError};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "elastoscat",
    about = "Time-domain elastic inverse obstacle scattering",
    version
)]
struct Cli {
    /// Worker threads for the per-frequency solves (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate noisy scattered-field traces for the configured obstacle.
    Simulate {
        /// Run configuration (JSON); omit for the built-in reference run.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output trace CSV path (sidecar written next to it).
        #[arg(long)]
        out: PathBuf,
        /// Override the noise seed from the configuration.
        #[arg(long)]
        seed: Option<u64>,
        /// Permit matching forward/inverse quadrature grids.
        #[arg(long)]
        allow_inverse_crime: bool,
    },
    /// Reconstruct the obstacle boundary from a trace file.
    Invert {
        /// Trace CSV produced by `simulate` (with its sidecar).
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory for report.jsonl and final_curve.json.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        allow_inverse_crime: bool,
    },
    /// Run the numerical self-verification suite.
    Verify,
    /// Export plot-ready CSV bundles from a reconstruction report.
    Plotdata {
        report: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Validation(format!("--threads: {e}")))?;
    }
    match cli.command {
        Command::Simulate {
            config,
            out,
            seed,
            allow_inverse_crime,
        } => {
            let config = cli::load_config(config.as_deref())?;
            cli::cmd_simulate(&config, &out, seed, allow_inverse_crime)?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Invert {
            data,
            config,
            out,
            allow_inverse_crime,
        } => {
            let config = cli::load_config(config.as_deref())?;
            let summary = cli::cmd_invert(&data, &config, &out, allow_inverse_crime)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&summary).map_err(|e| CliError::Io(e.to_string()))?
            );
            Ok(())
        }
        Command::Verify => cli::cmd_verify().map(|_| ()),
        Command::Plotdata { report, out } => {
            cli::cmd_plotdata(&report, &out)?;
            println!("wrote plot bundle to {}", out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
