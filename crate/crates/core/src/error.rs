use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error(
        "matrix is not Hermitian: asymmetry {asymmetry:.3e} exceeds tolerance {tolerance:.3e}"
    )]
    NotHermitian { asymmetry: f64, tolerance: f64 },

    #[error("vectors are not orthonormal: max |<v_i|v_j> - delta_ij| = {deviation:.3e}")]
    NotOrthonormal { deviation: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("vector length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("capacity exceeded: {what} is {requested}, cap is {limit}")]
    Capacity {
        what: &'static str,
        limit: usize,
        requested: usize,
    },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("unknown state name `{0}`")]
    UnknownState(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("state is not a two-branch superposition: {0}")]
    NotTwoBranch(String),

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}
