//! Crate-wide error type.
//!
//! All fallible operations in this crate return [`Result`]. Variants carry
//! enough context (paths, row numbers, term names) for a caller to report a
//! failure without re-deriving where it happened.

use thiserror::Error;

/// Errors produced by series handling, model fitting, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on caller-supplied data or parameters was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A CSV record did not match the expected schema.
    #[error("schema violation in {path} at row {row}, column `{column}`: {message}")]
    Schema {
        path: String,
        row: usize,
        column: String,
        message: String,
    },

    /// An underlying filesystem or stream error, annotated with the path.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// The penalized least squares system could not be solved.
    #[error("singular penalized system for term `{term}`: {detail}")]
    SingularSystem { term: String, detail: String },

    /// Backfitting produced non-finite fitted values.
    #[error("backfitting diverged at iteration {iteration} while updating term `{term}`")]
    Divergence { iteration: usize, term: String },

    /// No optimizer start produced a usable optimum.
    #[error("optimization failed: {0}")]
    Optimization(String),

    /// Two model fits that should be nested are not.
    #[error("models are not nested: {0}")]
    NotNested(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
