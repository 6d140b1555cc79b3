use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value at flat index {0}")]
    NonFinite(usize),

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("phantom component {index} is not inside the disc of radius {limit}")]
    PhantomOutside { index: usize, limit: f64 },

    #[error("near-zero pivot at row {row} (|pivot| = {pivot:e})")]
    SingularPivot { row: usize, pivot: f64 },

    #[error("factorization breakdown at row {row}: non-positive pivot {pivot:e}")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("Jacobi SVD did not converge after {sweeps} sweeps (off-diagonal mass {off:e})")]
    NoConvergence { sweeps: usize, off: f64 },

    #[error("harmonic stack is not conjugate symmetric (max asymmetry {0:e})")]
    Asymmetric(f64),

    #[error("harmonic n = {n}: {source}")]
    Harmonic {
        n: i64,
        #[source]
        source: Box<Error>,
    },

    #[error("reference image has zero norm")]
    ZeroReference,

    #[error("sinogram is identically zero")]
    EmptySinogram,

    #[error("container format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_harmonic(self, n: i64) -> Self {
        Error::Harmonic {
            n,
            source: Box::new(self),
        }
    }
}
