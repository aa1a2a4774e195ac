use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid interval: z = {z} lies before z0 = {z0}")]
    InvalidInterval { z: f64, z0: f64 },

    #[error("spectrum is singular at |k| = 0")]
    Singularity,

    #[error("invalid spectrum model: {0}")]
    InvalidModel(String),

    #[error(
        "quadrature did not converge: estimated error {estimate:e} above tolerance {tolerance:e}"
    )]
    Convergence { estimate: f64, tolerance: f64 },

    #[error("numerical integrity violated: {0}")]
    Integrity(String),

    #[error("singular field transform: {0}")]
    SingularTransform(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
