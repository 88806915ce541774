use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("operation unsupported for this domain variant: {0}")]
    Unsupported(String),

    #[error("point is not on the boundary (distance {0:.3e})")]
    NotOnBoundary(f64),

    #[error("substep too coarse: correction distance {dist:.3e} exceeds r0/2 = {limit:.3e}")]
    SubstepTooCoarse { dist: f64, limit: f64 },

    #[error("starting point lies outside the closed domain")]
    StartOutsideDomain,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grids are not nested: fine steps {fine} not divisible by coarse steps {coarse}")]
    NonNestedGrids { fine: usize, coarse: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
