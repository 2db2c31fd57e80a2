//! `neumann`: forward simulation, reconstruction, validation and kernel
//! dumps driven by a `key = value` configuration file.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use neumann_cli::commands::{cmd_forward, cmd_kernel, cmd_reconstruct, cmd_validate, RunOptions};
use neumann_cli::{parse_config, CliError};

#[derive(Parser)]
#[command(
    name = "neumann",
    version,
    about = "Wave-equation Neumann-trace simulation and inversion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Primary output path, overriding the configured one.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads; overrides the `threads` key (0 uses every core).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Record wall-clock information in the outputs.
    #[arg(long, global = true)]
    timestamps: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the Neumann traces of the configured phantom.
    Forward,
    /// Reconstruct the phantom on the configured grid from a trace file.
    Reconstruct {
        /// Trace file; defaults to the `output.trace` key.
        #[arg(long)]
        traces: Option<PathBuf>,
    },
    /// Run the configured identity checks; exits with 1 when a bound is exceeded.
    Validate,
    /// Tabulate Radon and Hilbert derivatives of the domain indicator.
    Kernel,
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let path = cli
        .config
        .ok_or_else(|| CliError::Invalid("--config PATH is required".into()))?;
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let cfg = parse_config(&text)?;
    let threads = cli.threads.unwrap_or(cfg.threads);
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Invalid(format!("thread pool: {e}")))?;
    }
    let mut opts = RunOptions {
        out: cli.out,
        traces: None,
        timestamps: cli.timestamps,
    };
    match cli.command {
        Command::Forward => {
            cmd_forward(&cfg, &opts)?;
        }
        Command::Reconstruct { traces } => {
            opts.traces = traces;
            let img = cmd_reconstruct(&cfg, &opts)?;
            if !img.converged {
                eprintln!("warning: fixed-point iteration did not reach the tolerance");
            }
        }
        Command::Validate => {
            let (outcomes, ok) = cmd_validate(&cfg, &opts)?;
            for o in outcomes.iter().filter(|o| !o.passed()) {
                eprintln!(
                    "{}: residual {:e} exceeds bound {:e}",
                    o.report.name, o.report.rel_residual, o.bound
                );
            }
            return Ok(ok);
        }
        Command::Kernel => {
            cmd_kernel(&cfg, &opts)?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
