use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    /// Operands do not live in the same space, or a vector has the wrong length.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A parameter violates its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An argument outside the domain of a scalar function (e.g. `λ_0`).
    #[error("domain error: {0}")]
    Domain(String),

    /// A NaN or infinity showed up in an iterate.
    #[error("non-finite value encountered at iteration {iteration}")]
    Divergence { iteration: usize },

    /// An iterative oracle exhausted its budget.
    #[error("no convergence within {iterations} iterations (last displacement {last_displacement:e})")]
    Budget {
        iterations: usize,
        last_displacement: f64,
    },

    /// The random instance generator could not satisfy its constraints.
    #[error("instance generation failed: {0}")]
    Generator(String),

    /// Estimation failed because every sampled pair was degenerate.
    #[error("degenerate sample: {0}")]
    Degenerate(String),

    /// The operation is not defined for this selector or set variant.
    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("{path}:{line}: {message}")]
    Config {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn dim_err(what: impl Into<String>) -> Error {
    Error::Dimension(what.into())
}
