use num_complex::Complex64;
use thiserror::Error;

use crate::systems::SystemId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown system `{0}`")]
    UnknownSystem(String),

    #[error("invalid parameters for {id:?}: {}", violations.join("; "))]
    InvalidParams {
        id: SystemId,
        violations: Vec<String>,
    },

    #[error("grid too coarse: n = {n}, need n >= {min}")]
    GridTooCoarse { n: usize, min: usize },

    #[error("unsupported space kind for this operation: {0}")]
    UnsupportedSpaceKind(String),

    #[error("unsupported boundary kind: {0}")]
    UnsupportedKind(String),

    #[error("dimension mismatch ({what}): expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("gram matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("resolvent at {0} is singular or ill-conditioned")]
    SingularOrIllConditioned(Complex64),

    #[error("eigenvalue solver did not converge")]
    EigenSolverFailed,

    #[error("no decay detected: operator norm {norm} at t = {t}")]
    NoDecayDetected { t: f64, norm: f64 },

    #[error("shifted block is not stable (abscissa {abscissa} after shift {gamma})")]
    ShiftedUnstable { gamma: f64, abscissa: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
