use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("zero field where a nonzero field is required ({0})")]
    ZeroField(&'static str),

    #[error("problem is not admissible: {0}")]
    NotAdmissible(String),

    #[error("no positive solution of the nodal linear system: {0}")]
    CramerViolation(String),

    #[error("nodal projection failed: {0}")]
    Projection(String),

    #[error("newton iteration failed: {0}")]
    Newton(String),

    #[error("bump construction: {0}")]
    Bumps(String),

    #[error("sign collapse: {0}")]
    SignCollapse(String),

    #[error("continuation stage at p = {p} did not converge ({status})")]
    Continuation { p: f64, status: String },
}

pub type Result<T> = std::result::Result<T, Error>;
