use thiserror::Error;

/// Errors raised by the laboratory's operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty point set: {0}")]
    EmptySet(&'static str),

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("insufficient samples: need {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("radius {rho} is below the resolution floor {floor}")]
    BelowResolution { rho: f64, floor: f64 },

    #[error("unreliable tangents on {fraction:.3} of in-support samples")]
    UnreliableTangents { fraction: f64 },

    #[error("ambiguous sheet matching: {0}")]
    AmbiguousMatching(String),

    #[error("not graphical over axis: {0}")]
    NotGraphical(String),

    #[error("not a Θ ≥ 2 point: {0}")]
    NotSingularPoint(String),

    #[error("optimizer failure: {0}")]
    Optimizer(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag used in structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidInput(_) => "invalid_input",
            Error::EmptySet(_) => "empty_set",
            Error::Degenerate(_) => "degenerate",
            Error::InsufficientSamples { .. } => "insufficient_samples",
            Error::BelowResolution { .. } => "below_resolution",
            Error::UnreliableTangents { .. } => "unreliable_tangents",
            Error::AmbiguousMatching(_) => "ambiguous_matching",
            Error::NotGraphical(_) => "not_graphical",
            Error::NotSingularPoint(_) => "not_singular_point",
            Error::Optimizer(_) => "optimizer",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}
