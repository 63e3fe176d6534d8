//! Batch experiments over the `gblgp` library: manifest resolution, parallel
//! runs with one JSON record each, and the summary and plot-data files
//! rebuilt from those records.

use std::io;
use std::path::{Path, PathBuf};

use gblgp::analysis::AnalysisError;
use gblgp::benchmarks::BenchmarkError;
use gblgp::evolution::EvolutionError;
use gblgp::scfg::{GrammarError, SampleError};
use thiserror::Error;

pub mod commands;
pub mod manifest;

pub use commands::{grammar_check, report, run_experiment, sample, ReportOutcome, RunOptions};
pub use manifest::{apply_overrides, resolve_grammar, ExperimentManifest, Plan};

/// Environment variable naming the output directory when neither the
/// command line nor the manifest does.
pub const OUTPUT_DIR_ENV: &str = "GBLGP_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "results";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("{}: {source}", path.display())]
    Grammar { path: PathBuf, source: GrammarError },
    #[error(transparent)]
    Benchmark(#[from] BenchmarkError),
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error("no readable run records in {}", .0.display())]
    NoRecords(PathBuf),
}

impl CliError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }
}
