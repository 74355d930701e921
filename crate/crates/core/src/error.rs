use thiserror::Error;

/// Errors raised by estimation, calibration and evaluation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },

    #[error("solver did not converge in {iterations} iterations (best KKT violation {violation:e})")]
    NotConverged { iterations: u64, violation: f64 },

    #[error("coordinate {index} is degenerate (min equals max)")]
    DegenerateCoordinate { index: usize },

    #[error("column {index} has zero variance")]
    ZeroVariance { index: usize },

    #[error("mass {beta} is not on the calibration grid (available: {available:?})")]
    MassNotInGrid { beta: f64, available: Vec<f64> },

    #[error("volume estimation is limited to d <= {max}, got d = {found}")]
    DimensionTooHigh { max: usize, found: usize },

    #[error("member {member} (sigma = {sigma}): {source}")]
    Member {
        member: usize,
        sigma: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::NotConverged { .. })
            && !matches!(self, Error::Member { source, .. } if !source.is_validation())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
