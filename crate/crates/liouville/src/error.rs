use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid size must be an even power of two >= 32, got {0}")]
    BadGridSize(usize),

    #[error("fields live on different grids ({0} vs {1} cells per side)")]
    GridMismatch(usize, usize),

    #[error("coupling matrix is not symmetric positive definite (min eigenvalue {min_eig:.6e})")]
    NotPositiveDefinite { min_eig: f64 },

    #[error("coupling matrix must be symmetric: |a[{i}][{j}] - a[{j}][{i}]| = {dev:.3e}")]
    NotSymmetric { i: usize, j: usize, dev: f64 },

    #[error("component count {0} out of range 1..=16")]
    BadComponentCount(usize),

    #[error("singular coefficient alpha[{i}] = {alpha} at source {m} must be > -1")]
    BadAlpha { i: usize, m: usize, alpha: f64 },

    #[error("singular sources {0} and {1} coincide")]
    DuplicateSource(usize, usize),

    #[error("smooth weight h[{i}] must be strictly positive everywhere (min {min:.3e})")]
    NonPositiveWeight { i: usize, min: f64 },

    #[error("weight exponent {exponent:.1} at source {m} exceeds the overflow bound 700")]
    WeightOverflow { m: usize, exponent: f64 },

    #[error("rho[{0}] must be strictly positive")]
    NonPositiveRho(usize),

    #[error("subset of components must be nonempty")]
    EmptySubset,

    #[error("off-diagonal entry a[{i}][{j}] = {value} > 0 violates the non-positive coupling hypothesis")]
    PositiveOffDiagonal { i: usize, j: usize, value: f64 },

    #[error("lambda = {lambda} violates the resolution rule lambda <= n/8 = {max}")]
    ResolutionViolation { lambda: f64, max: f64 },

    #[error("need at least {need} values, got {got}")]
    TooFewValues { need: usize, got: usize },

    #[error("radius {0} is below the quadrature floor 4h = {1}")]
    RadiusTooSmall(f64, f64),

    #[error("field is corrupt: {0}")]
    CorruptField(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
