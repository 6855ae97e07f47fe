//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A record or value violated a structural invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// A line of an input file failed to parse or validate.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Bad configuration (out-of-range parameter, missing field).
    #[error("config error: {0}")]
    Config(String),

    /// Numerical failure such as divergence or a degenerate normalization.
    #[error("numerical error: {0}")]
    Numeric(String),

    /// Remote judge failure after exhausting retries, or an unusable reply.
    #[error("remote scorer error: {0}")]
    Remote(String),
}

pub type Result<T> = std::result::Result<T, Error>;
