//! Error type shared across the library and the CLI.

use thiserror::Error;

/// Library-wide error type.
///
/// The CLI maps variants onto process exit codes: [`Error::Config`] → 2,
/// [`Error::Horizon`] → 3, [`Error::NotConverged`] → 4,
/// [`Error::ThresholdExceeded`] → 5, everything else → 1.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The run would push the support of the solution past the right edge of
    /// the grid, so the zero-extension convention would silently truncate it.
    #[error(
        "horizon violation: support max {support_max} + g*t = {required:.6} exceeds grid length {grid_length}"
    )]
    Horizon {
        support_max: f64,
        required: f64,
        grid_length: f64,
    },

    /// The series hit the term cap before the certified remainder met the
    /// tolerance. Partial results are still usable; callers decide.
    #[error("series not converged: remainder bound {remainder_bound:e} > tol {tol:e} after {n_terms} terms")]
    NotConverged {
        remainder_bound: f64,
        tol: f64,
        n_terms: usize,
    },

    /// A cross-solver gap exceeded the configured comparison threshold.
    #[error("comparison threshold exceeded: max relative L1 gap {max_gap:.6} > {threshold:.6}")]
    ThresholdExceeded { max_gap: f64, threshold: f64 },

    /// Malformed run configuration, anchored to the offending line.
    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid<S: Into<String>>(msg: S) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
