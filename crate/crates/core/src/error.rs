use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the discretization pipeline.
#[derive(Debug, Error)]
pub enum WgError {
    #[error("topology error: {0}")]
    Topology(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("quadrature degree {requested} exceeds supported maximum {max}")]
    QuadratureDegree { requested: usize, max: usize },

    #[error("singular local matrix on cell {cell}: {what}")]
    Singular { cell: usize, what: &'static str },

    #[error("conjugate gradients did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("matrix is not positive definite (p^T A p = {curvature:.3e} at iteration {iteration})")]
    NotPositiveDefinite { iteration: usize, curvature: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = WgError> = std::result::Result<T, E>;
