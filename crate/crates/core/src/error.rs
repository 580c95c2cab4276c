use thiserror::Error;

/// Errors raised by the tensor-train, cross and stochastic Galerkin routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("size guard: {what} needs {size} entries, limit is {limit}")]
    Guard {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("matrix is rank deficient ({0}); reduce the requested rank")]
    RankDeficient(String),

    #[error("evaluator returned a non-finite value at index {index:?}")]
    NonFinite { index: Vec<usize> },

    #[error("covariance is not positive semidefinite: eigenvalue {value:e} (largest {largest:e})")]
    NotPsd { value: f64, largest: f64 },

    #[error("covariance entry ({row}, {col}) = {target:e} is outside the attainable range [{lo:e}, {hi:e}]")]
    Unattainable {
        row: usize,
        col: usize,
        target: f64,
        lo: f64,
        hi: f64,
    },

    #[error("operator is not positive definite: <p, Kp> = {0:e}")]
    Indefinite(f64),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
