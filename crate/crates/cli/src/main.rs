//! Command-line driver: configuration ingestion, grid evaluation with
//! optional identity diagnostics, metric quadratures along a path, and a
//! verification suite that runs every identity check at configured
//! tolerances.
//!
//! Exit codes: 0 on success, 1 when a verification check fails or an
//! evaluation cannot complete, 2 on configuration errors.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod output;

#[derive(Parser)]
#[command(
    name = "ernstkit",
    about = "Theta-functional Ernst potentials on hyperelliptic curves",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Output format, overriding the configuration.
    #[arg(long, value_parser = ["csv", "json"])]
    format: Option<String>,
    /// Finite-difference step, overriding the configuration.
    #[arg(long)]
    fd_step: Option<f64>,
    /// Quadrature order, overriding the configuration.
    #[arg(long)]
    quad_order: Option<usize>,
    /// Worker threads for grid evaluation; output is identical for any
    /// value.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run the verification suite over the configured solution.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Evaluate the potential on the configured grid.
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        /// Also compute per-point identity and PDE residuals.
        #[arg(long)]
        with_residuals: bool,
    },
    /// Integrate the metric functions A and k along the configured path.
    Metric {
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Verify { common } => commands::run_verify(&common),
        Command::Eval {
            common,
            with_residuals,
        } => commands::run_eval(&common, with_residuals),
        Command::Metric { common } => commands::run_metric(&common),
    };
    match code {
        Ok(c) => ExitCode::from(c),
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e}");
            ExitCode::from(2)
        }
    }
}
