//! Error type shared by every module in the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty-data: {0}")]
    EmptyData(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("dimension mismatch at row {row}: expected {expected} features, got {got}")]
    DimensionMismatch {
        row: usize,
        expected: usize,
        got: usize,
    },

    #[error("insufficient data: {rows} complete rows for {cols} columns")]
    InsufficientData { rows: usize, cols: usize },

    #[error("zero variance in {0}")]
    ZeroVariance(String),

    #[error("singular fit (condition estimate {condition:.3e}); offending columns: {columns:?}")]
    SingularFit { columns: Vec<String>, condition: f64 },

    #[error("matrix not positive definite (condition estimate {condition:.3e})")]
    NotPositiveDefinite { condition: f64 },

    #[error("quantile fit for q = {q} did not converge after {iterations} iterations (last loss {last_loss:.6e})")]
    NonConvergence {
        q: f64,
        iterations: usize,
        last_loss: f64,
        last_weights: Vec<f64>,
        loss_history: Vec<f64>,
    },

    #[error("integration bracket too narrow: {0}")]
    Bracket(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 data/format, 3 fit failure, 4 alignment.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::SingularFit { .. }
            | Error::NotPositiveDefinite { .. }
            | Error::NonConvergence { .. }
            | Error::InsufficientData { .. }
            | Error::ZeroVariance(_) => 3,
            Error::Alignment(_) => 4,
            _ => 2,
        }
    }
}
