use thiserror::Error;

/// Errors produced while building or querying a distance structure.
#[derive(Debug, Error)]
pub enum Error {
    #[error("polytope is unbounded")]
    UnboundedPolytope,
    #[error("polytope has an empty interior")]
    EmptyInterior,
    #[error("invalid polytope: {0}")]
    InvalidPolytope(String),
    #[error("point lies outside the body (slack {slack:e})")]
    PointOutside { slack: f64 },
    #[error("point is not strictly interior (min slack {slack:e})")]
    PointNotInterior { slack: f64 },
    #[error("expansion must be positive, got {0}")]
    NonPositiveDelta(f64),
    #[error("scale factor must be positive, got {0}")]
    NonPositiveLambda(f64),
    #[error("degenerate Macbeath region (slack {slack:e} at halfspace {index})")]
    DegenerateRegion { index: usize, slack: f64 },
    #[error("ellipsoid solver failed: {0}")]
    SolverFailure(String),
    #[error("coverage failure at level {level}: {detail}")]
    CoverageFailure { level: usize, detail: String },
    #[error("representative of patch {node} overshoots by {excess:e} (epsilon {epsilon})")]
    RepresentativeInvalid { node: usize, excess: f64, epsilon: f64 },
    #[error("query point is outside the polytope")]
    OutsidePolytope,
    #[error("no patch covers the query point")]
    EmptyPatchList,
    #[error("kappa is only defined on the open interval (-1, 1), got {0}")]
    DomainError(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("structure file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
