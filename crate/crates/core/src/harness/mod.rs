//! Experiment runner: configuration, Monte Carlo and theory runs, comparison
//! reports and CSV artifacts.

mod compare;
pub mod config;
pub mod io;
mod run;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::spectral::SpectralError;
use crate::theory::TheoryError;

pub use compare::{
    compare_curves, run_compare, ComparePoint, ComparisonReport, DerivedObservables, Series,
};
pub use config::{
    preset, presets, CompareConfig, ExperimentConfig, GridConfig, LateTime, SpecConfig, SweepConfig,
    TheoryConfig,
};
pub use io::{SweepRow, Table};
pub use run::{
    output_root, run_simulate, run_sweep, run_theory, theory_file, with_workers, RunOptions, SimulateStatus,
    TheoryOutcome, CHECKPOINT_FILE, CONFIG_FILE, OUT_ENV, RESIDENCE_FILE, SURVIVAL_FILE, SWEEP_FILE,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_COMPARISON: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("bad artifact: {0}")]
    Schema(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Theory(#[from] TheoryError),
}

impl HarnessError {
    pub fn config(msg: impl Into<String>) -> Self {
        HarnessError::Config(msg.into())
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn csv(path: &Path, source: csv::Error) -> Self {
        HarnessError::Csv {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit status for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Spectral(_) | HarnessError::Theory(_) => EXIT_NUMERICAL,
            _ => EXIT_CONFIG,
        }
    }
}
