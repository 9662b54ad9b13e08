//! Error type shared by every module of the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong across the pipeline.
///
/// Variants are grouped by failure class so callers (notably the CLI) can map
/// them onto coarse exit categories: invalid input, iterative solver failure,
/// sample too small, numerically ill-conditioned problem.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on user-supplied data failed.
    #[error("invalid input: {reason}")]
    InvalidInput { reason: String },

    /// Two objects that must share a shape do not.
    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    /// Sphere data spread beyond the hemisphere cap where the median is
    /// guaranteed unique.
    #[error(
        "sphere sample too dispersed: max pairwise distance {max_distance:.6} \
         exceeds the pi/2 concentration bound"
    )]
    ConcentrationViolation { max_distance: f64 },

    /// Logarithm map requested between antipodal points, where it is singular.
    #[error("antipodal points: log map is undefined (inner product {inner:.6})")]
    AntipodalPoints { inner: f64 },

    /// An iterative solver ran out of iterations. Carries the flattened
    /// coordinates of the last iterate so callers can inspect or resume it.
    #[error(
        "no convergence after {iterations} iterations (last step {last_step:.3e}, \
         tolerance {tolerance:.3e})"
    )]
    Convergence {
        iterations: usize,
        last_step: f64,
        tolerance: f64,
        last_iterate: Vec<f64>,
    },

    /// A pointwise solve failed somewhere along the grid; wraps the
    /// underlying failure with the offending time index.
    #[error("at time index {index}: {source}")]
    AtTime {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    /// Too few observations for the requested estimator.
    #[error("insufficient sample: need at least {required} observations, got {actual}")]
    InsufficientSample { required: usize, actual: usize },

    /// Spectral quantities too close to degenerate for a stable answer.
    #[error("ill-conditioned: {reason}")]
    IllConditioned { reason: String },
}

impl Error {
    /// Shorthand for [`Error::InvalidInput`].
    pub fn invalid(reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            reason: reason.into(),
        }
    }

    /// Shorthand for [`Error::IllConditioned`].
    pub fn ill_conditioned(reason: impl Into<String>) -> Self {
        Error::IllConditioned {
            reason: reason.into(),
        }
    }
}
