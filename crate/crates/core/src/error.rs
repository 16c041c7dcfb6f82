use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("singular matrix: pivot {pivot:.3e} below threshold for norm {norm:.3e}; matrix {context}")]
    SingularMatrix {
        pivot: f64,
        norm: f64,
        context: String,
    },

    #[error("matrix is not Hermitian: ||a - a*|| = {defect:.3e} (||a|| = {norm:.3e})")]
    NotHermitian { defect: f64, norm: f64 },

    #[error("{what} did not converge after {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("{what} left the operator half-plane (extreme imaginary eigenvalue {im_eigenvalue:.3e}) at {context}")]
    DomainEscape {
        what: &'static str,
        im_eigenvalue: f64,
        context: String,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid model pair: {0}")]
    InvalidPair(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("embedding unwrap inconsistent: k * mass = {scaled_mass:.6} exceeds 1")]
    UnwrapInconsistent { scaled_mass: f64 },

    #[error("grid point t = {t} failed: {source}")]
    GridPoint {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("realization of x is not positive in trial {trial}: min eigenvalue {min_eigenvalue:.3e}")]
    NonPositiveRealization { trial: usize, min_eigenvalue: f64 },

    #[error("dense eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
