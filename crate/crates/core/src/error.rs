use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// The spherical-uniform density was evaluated at its singular point.
    #[error("spherical-uniform density is singular at the origin")]
    Singularity,

    /// Degenerate or invalid geometry (duplicate atoms, self-intersecting cells).
    #[error("geometry error: {0}")]
    Geometry(String),

    /// An iterative solver stopped before reaching its tolerance.
    #[error("did not converge after {iterations} iterations (worst residual {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },

    /// A density family or its parameters are invalid.
    #[error("invalid density: {0}")]
    Density(String),

    /// Invalid run configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Operation requires state that has not been produced yet.
    #[error("state error: {0}")]
    State(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
