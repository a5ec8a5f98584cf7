use thiserror::Error;

/// Rejections raised before any iteration runs.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProgramError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite coefficient in {0}")]
    NonFinite(String),
    #[error("quadratic constraint {0} has an asymmetric matrix")]
    NotSymmetric(usize),
    #[error("quadratic constraint {index} is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { index: usize, min_eigenvalue: f64 },
}
