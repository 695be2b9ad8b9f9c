use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("schema error: {0}")]
    Schema(String),

    /// A malformed cell. `row` is 1-based over data rows (the header is row 0).
    #[error("row {row}, column '{column}': {message}")]
    Cell {
        row: usize,
        column: String,
        message: String,
    },

    #[error("N=0 unsupported: dataset has no rows")]
    EmptyData,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("column '{0}' has zero variance")]
    ZeroVariance(String),

    #[error("thresholds must be finite and strictly ascending")]
    NonAscendingThresholds,

    #[error("unidentifiable threshold at level {level}: cumulative proportion {proportion}")]
    UnidentifiableThreshold { level: usize, proportion: f64 },

    #[error("optimizer did not converge after {iterations} iterations (best x = {best})")]
    NotConverged { best: f64, iterations: usize },

    #[error("degenerate within-set covariance: {0}")]
    Degenerate(String),

    #[error("correlation matrix is not positive definite: repair required")]
    RepairRequired,

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

impl Error {
    /// True for failures that originate in numerics rather than malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotConverged { .. }
                | Error::Degenerate(_)
                | Error::RepairRequired
                | Error::UnidentifiableThreshold { .. }
                | Error::ZeroVariance(_)
        )
    }
}
