use thiserror::Error;

/// Failures of the manifold primitives.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum GeometryError {
    #[error("tangent vectors live at different base points")]
    BaseMismatch,
    #[error("points are in each other's cut locus (cosine {cosine:.3e})")]
    CutLocus { cosine: f64 },
    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("point is not on the manifold: {0}")]
    NotOnManifold(String),
    #[error("vector is not tangent at its base point: {0}")]
    NotTangent(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("operation not supported by this manifold: {0}")]
    Unsupported(&'static str),
}

/// Crate-level error.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("component index {index} out of range for {len} components")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("L-BFGS memory is empty")]
    EmptyMemory,
    #[error("divergence at pass {passes}: objective {objective:.6e} (initial {initial:.6e})")]
    Divergence { passes: f64, objective: f64, initial: f64 },
    #[error("oracle failed to converge after {iterations} iterations (residual {residual:.3e})")]
    OracleFailure { iterations: usize, residual: f64 },
    #[error("dataset format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
