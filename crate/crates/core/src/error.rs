//! Error type shared by every module in the crate.

use thiserror::Error;

/// Unified error for grid construction, solves, spectral work, and fits.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("shooting failed for omega={omega}: {reason}")]
    ShootingFailed { omega: f64, reason: String },

    #[error("sweep solve failed at omega={omega}: {source}")]
    SweepSolveFailed {
        omega: f64,
        #[source]
        source: Box<CoreError>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("spectral anomaly: {0}")]
    SpectralAnomaly(String),

    #[error("fit rejected: {0}")]
    FitRejected(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
