use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spin quantum number {0}: 2j must be a non-negative integer")]
    InvalidSpin(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("site index {index} out of range for {len} sites")]
    SiteOutOfRange { index: usize, len: usize },

    #[error("sites {0} and {1} occupy the same position")]
    CoincidentSites(usize, usize),

    #[error("bond scale {value} for group {group} is outside (0.5, 1.5)")]
    ScaleOutOfRange { group: &'static str, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("time grids differ: {0}")]
    GridMismatch(String),

    #[error("insufficient points: need more than {needed}, found {found}")]
    InsufficientPoints { needed: usize, found: usize },

    #[error("Hamiltonian is not Hermitian (defect {0:e})")]
    NonHermitian(f64),

    #[error("step size underflow at t = {time} us: could not reach tolerance {tol:e}")]
    StepUnderflow { time: f64, tol: f64 },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument(_) | Error::InvalidSpin(_) | Error::ScaleOutOfRange { .. } => {
                ErrorKind::Usage
            }
            Error::NonHermitian(_) | Error::StepUnderflow { .. } | Error::Eigen(_) => {
                ErrorKind::Numerical
            }
            _ => ErrorKind::Data,
        }
    }
}
