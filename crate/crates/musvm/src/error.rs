//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by training, span computation, selection and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// Two containers that must agree in length or dimension do not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A hyperparameter or argument violates its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// An iterative routine exhausted its iteration budget.
    #[error("did not converge: {what} (residual {residual:.3e} after {iters} iterations)")]
    NonConvergence {
        what: String,
        residual: f64,
        iters: usize,
    },

    /// A linear system required by a span computation is numerically singular.
    #[error("singular span system: {what} (condition estimate {cond:.3e})")]
    SingularSystem { what: String, cond: f64 },

    /// A reference-oracle size cap was exceeded; oracles are deliberately slow.
    #[error("oracle size cap exceeded: {what} ({got} > {cap})")]
    SizeCap {
        what: String,
        got: usize,
        cap: usize,
    },

    /// Requested fold count cannot produce stratified folds for this data.
    #[error("stratification infeasible: {0}")]
    Stratification(String),

    /// A text input (dataset or model file) failed to parse.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Model file header does not match a supported format version.
    #[error("unsupported model format: {0}")]
    FormatVersion(String),

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
