//! The `omm` command line: operator spectra, single solves, the experiment
//! drivers and SVG plots of their outputs.
//!
//! Exit codes: 0 on success (a solve that hits `max_iters` still succeeds and
//! says `"converged": false`), 1 for usage, configuration and runtime errors,
//! 2 when the `theory` experiment has a failing check.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod plot;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

use sparse_omm::OmmError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("input does not match the expected schema: {0}")]
    Schema(String),
    #[error("{0} theory check(s) failed")]
    TheoryFailed(usize),
    #[error(transparent)]
    Core(#[from] OmmError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::TheoryFailed(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "omm", version, about = "Sparse low-lying eigenspaces via l1-penalized orbital minimization")]
pub struct Cli {
    /// INI-style configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Overrides every seed in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for ensembles (0: one per core).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Ensemble size for `local-minima` (for example 10000 for a long check
    /// at one `mu`).
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Overrides the penalty with a single constant value.
    #[arg(long, global = true)]
    pub mu: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eigenvalues of the operator and the gap above the m-th.
    Spectrum,
    /// One minimization; writes the trace, final X and metrics.
    Solve,
    /// One of: mu-sweep, compare, local-minima, ic-dependence, dynamic-mu, theory.
    Experiment { name: String },
    /// Renders a CSV written by `solve` or an experiment as SVG.
    Plot {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "trace")]
        kind: plot::PlotKind,
        /// Trace column to plot.
        #[arg(long, value_enum, default_value = "emu")]
        series: plot::TraceSeries,
        /// Heatmap run to show when the counts CSV has an `L` column.
        #[arg(long)]
        group: Option<String>,
    },
}

/// Runs the parsed command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match commands::dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("omm: {e}");
            e.exit_code()
        }
    }
}
