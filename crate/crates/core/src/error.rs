use thiserror::Error;

/// Errors produced by the library.
///
/// The variants map onto the failure classes surfaced by the CLI exit codes:
/// validation and domain problems (exit 2), data problems (exit 3) and
/// numerical failures (exit 4).
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Model parameters violate an invariant (weights, ranges, shapes).
    #[error("invalid parameters: {0}")]
    Validation(String),

    /// An operation was called in a way that can never be correct
    /// (index clashes, dimension mismatches, too little input).
    #[error("usage error: {0}")]
    Usage(String),

    /// An iterative routine failed to converge. Treated as a bug for
    /// well-posed inputs.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A data file could not be parsed.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Not enough observations to carry out an estimation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
