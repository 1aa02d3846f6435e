use thiserror::Error;

use crate::quad::QuadResult;

/// Errors raised by the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An index set violates the strictly-increasing invariant or is malformed.
    #[error("invalid index set: {0}")]
    InvalidIndexSet(String),

    /// The truncated index set of a kernel is empty.
    #[error("kernel has rank 0: no index of the set lies below cap {cap}")]
    EmptyKernel { cap: u64 },

    /// An argument that does not fit any of the more specific variants.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Adaptive quadrature exhausted its evaluation budget.
    #[error(
        "quadrature did not converge: value {} with error estimate {:e} after {} evaluations",
        .0.value, .0.abs_error_estimate, .0.evaluations
    )]
    NonConvergence(QuadResult),

    /// A probability-zero event was hit numerically (degenerate orthogonalization,
    /// violated projection inequality).
    #[error("numeric anomaly: {0}")]
    NumericAnomaly(String),
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;
