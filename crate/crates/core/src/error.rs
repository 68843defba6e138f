use thiserror::Error;

#[derive(Debug, Error)]
pub enum OmmError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operator is not negative definite: largest eigenvalue {largest} after shift")]
    NotNegativeDefinite { largest: f64 },

    #[error("operator is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("eigendecomposition did not converge within {iterations} iterations")]
    EigenNoConvergence { iterations: usize },

    #[error("matrix is rank deficient")]
    RankDeficient,

    #[error("index {index} out of range for {len} columns")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("backtracking failed to find an acceptable step after {attempts} attempts at iteration {iteration}")]
    BacktrackExhausted { iteration: usize, attempts: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("missing data: {0}")]
    MissingData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, OmmError>;
