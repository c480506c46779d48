use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: usize,
        message: String,
    },

    #[error("line {line}, column {column}: non-finite value")]
    NonFinite { line: u64, column: usize },

    #[error("input contains no samples")]
    Empty,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate split: n' = {n_prime}, n'' = {n_dprime} (both must be >= 2)")]
    DegenerateSplit { n_prime: usize, n_dprime: usize },

    #[error("labels must contain both groups")]
    SingleGroup,

    #[error("invalid probability table: {0}")]
    InvalidPmf(String),

    #[error("joint is not Markov X -> Y -> Z (factorization residual {residual:.3e})")]
    NotMarkov { residual: f64 },

    #[error("infeasible alpha interval: lower bound {lo} >= upper bound {hi}")]
    InfeasibleInterval { lo: f64, hi: f64 },

    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    /// `true` when the error was caused by the caller's input rather than a
    /// numeric breakdown inside the library.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Numeric(_))
    }
}
