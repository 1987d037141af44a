use thiserror::Error;

use crate::grid::Space;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: expected length {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("space mismatch: expected {expected:?} field, got {actual:?}")]
    SpaceMismatch { expected: Space, actual: Space },

    #[error("preconditioner is singular at frequency {frequency:?}; use a positive shift")]
    SingularPreconditioner { frequency: [usize; 3] },

    #[error("ILU(0) breakdown on multigrid level {level} (N = {n})")]
    Factorization { level: usize, n: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("dense assembly refused for N = {0} (limit is 8)")]
    TooLarge(usize),

    #[error("eigensolver did not converge after {iterations} iterations (worst relative residual {worst:.3e})")]
    NotConverged { iterations: usize, worst: f64 },

    #[error("spurious eigenvalues persist after {escalations} penalty escalations (gamma = {gamma:.3e})")]
    Spurious { escalations: usize, gamma: f64 },

    #[error("solver failed at k-point {index} (k = {k:?}): {source}")]
    AtKPoint {
        index: usize,
        k: [f64; 3],
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors that come from the numerical solve rather than from the input.
    pub fn is_solver_failure(&self) -> bool {
        match self {
            Error::NotConverged { .. }
            | Error::Spurious { .. }
            | Error::Factorization { .. }
            | Error::SingularPreconditioner { .. } => true,
            Error::AtKPoint { source, .. } => source.is_solver_failure(),
            _ => false,
        }
    }
}

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Shape { expected, actual })
    }
}
