//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A cross-point operation received tangent vectors anchored at different points.
    #[error("base point mismatch: {0}")]
    BasePointMismatch(String),

    #[error("point not on manifold: {0}")]
    NotOnManifold(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    /// log/transport requested between points farther apart than the
    /// injectivity radius allows (e.g. antipodal sphere points).
    #[error("outside injectivity radius: {0}")]
    OutsideInjectivityRadius(String),

    #[error("empty batch")]
    EmptyBatch,

    #[error("component index {index} out of range (N = {n})")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("cubic subproblem solver failed: {0}")]
    SubproblemFailure(String),

    #[error("Lanczos eigenvalue estimation failed: {0}")]
    LanczosFailure(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
