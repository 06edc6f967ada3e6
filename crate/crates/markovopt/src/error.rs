//! Error type shared by the library.

use thiserror::Error;

/// Errors produced by chain analysis, estimators, optimizers and problems.
#[derive(Debug, Error)]
pub enum Error {
    #[error("chain is not ergodic (irreducible and aperiodic)")]
    NonErgodic,

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("time-step cap exceeded (cap {0})")]
    CapExceeded(u64),

    #[error("chain is not reversible with respect to its stationary distribution")]
    NotReversible,

    #[error("transition probability must lie strictly inside (0, 1), got {0}")]
    InvalidProbability(f64),

    #[error("invalid size: {0}")]
    InvalidSize(usize),

    #[error("sample count {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("invalid run parameters: {0}")]
    InvalidParams(String),

    #[error("empty trace")]
    EmptyTrace,

    #[error("invalid state index {0}")]
    BadState(usize),

    #[error("linear system is singular")]
    SingularSystem,

    #[error("dimension must be even, got {0}")]
    OddDimension(usize),

    #[error("invalid transition matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("AR(1) process requires spectral radius < 1, estimated {0}")]
    UnstableAr(f64),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
