use thiserror::Error;

/// Failures raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid interval [{lo}, {hi}]: bounds must be finite with lo < hi")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("Chebyshev grid degree must be at least 1")]
    ZeroDegree,
    #[error("expected at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("non-finite value encountered {context}")]
    NonFinite { context: String },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("cover integrity violated: {0}")]
    CoverIntegrity(String),
    #[error("point {point:?} lies outside the domain")]
    OutsideDomain { point: Vec<f64> },
    #[error("field rejected by motion policy: {0}")]
    FieldRejected(String),
    #[error("geometry violation: {0}")]
    Geometry(String),
    #[error("trajectory self-check failed: analytic and RK4 positions differ by {diff:e}")]
    TrajectoryMismatch { diff: f64 },
    #[error("gradient magnitude {magnitude:e} too small at {point:?}")]
    DegenerateGradient { point: Vec<f64>, magnitude: f64 },
    #[error("no interface crossing within reach of patch {patch}")]
    NoInterfaceInReach { patch: usize },
    #[error("root refinement did not converge (residual {residual:e})")]
    RootNotConverged { residual: f64 },
    #[error("degenerate curve: need at least 3 points, got {0}")]
    DegenerateCurve(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
