//! Exact time evolution of the level population, ensemble averages, and
//! plateau/offset estimators.

mod decompose;
pub mod eigen;
pub mod estimators;
mod sff;
mod survival;

pub use decompose::{
    decompose, decompose_eigenbasis, dot_levels, overlaps_of_matrix, plateau_estimate, OverlapSet,
    Solver, KRAMERS_TOLERANCE, NORMALIZATION_TOLERANCE, RESIDUAL_TOLERANCE,
};
pub use estimators::Estimate;
pub use sff::{empirical_sff, level_cdf, SffCurve, SFF_WINDOW};
pub use survival::{
    average_survival, average_survival_with, check_success, chunk_count, ensemble_moments,
    plateau_observable, reduce_chunks, run_chunk, sample_overlaps, survival, survival_at,
    survival_observable, window_observable, AverageOptions, ChunkResult, Method, Moments, Spacing,
    SurvivalCurve, TimeGrid, DEFAULT_CHUNK, MIN_SUCCESS_FRACTION,
};

use thiserror::Error;

use crate::ensembles::EnsembleError;
use crate::numerics::NumericsError;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SpectralError {
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("eigensolver did not converge: {0}")]
    NonConvergence(String),
    #[error("eigen-residual {residual:e} exceeds {bound:e}")]
    Residual { residual: f64, bound: f64 },
    #[error("overlaps sum to {0}, not 1")]
    Normalization(f64),
    #[error("Kramers partners split by {gap:e}")]
    Kramers { gap: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("{failed} of {total} realizations failed")]
    TooManyFailures { failed: u64, total: u64 },
}
