use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("component index {index} out of range for path of dimension {dim}")]
    ComponentOutOfRange { index: usize, dim: usize },
    #[error("empty multi-index")]
    EmptyMultiIndex,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("algebra re-expression residual {residual:e} exceeds {tol:e}")]
    NotInAlgebra { residual: f64, tol: f64 },
    #[error("multi-index of size {size} exceeds the permutation cap {cap}")]
    SizeCapExceeded { size: usize, cap: usize },
    #[error("non-finite state encountered")]
    NonFinite,
    #[error("slope undefined: {0}")]
    SlopeUndefined(String),
    #[error("duplicate particular initial points at indices {0} and {1}")]
    DuplicateParticulars(usize, usize),
    #[error("trajectory does not start at the identity (deviation {0:e})")]
    NotIdentityStart(f64),
    #[error("base point is not on the unit sphere (norm {0})")]
    NotUnitNorm(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
