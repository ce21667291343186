use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("no convergence: {0}")]
    NonConvergence(String),
    #[error("radius {r} outside [0, {r_max}]")]
    OutOfRange { r: f64, r_max: f64 },
    #[error("point outside the tube: {0}")]
    OutsideTube(String),
    #[error("focal point reached (det = {0:e})")]
    SingularTube(f64),
    #[error("point on the branch locus of the pure gauge")]
    OnBranchLocus,
    #[error("stencil leaves the evaluation domain: {0}")]
    StencilOutsideDomain(String),
    #[error("eigensolver failed: {0}")]
    EigenFailure(String),
    #[error("linear solve failed: {0}")]
    SolverFailure(String),
    #[error("right-hand side violates the r^-4 decay class: {0}")]
    DecayViolation(String),
    #[error("right-hand side has nonzero mean (relative {0:e})")]
    MeanNotZero(f64),
    #[error("end coefficients are unbalanced (sum = {0:e})")]
    UnbalancedLambda(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
