use std::fmt;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Which information matrix a validation error refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfoMatrix {
    Observed,
    Complete,
    Missing,
}

impl fmt::Display for InfoMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InfoMatrix::Observed => "i_obs",
            InfoMatrix::Complete => "i_com",
            InfoMatrix::Missing => "i_mis",
        })
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{0} is not symmetric")]
    NotSymmetric(InfoMatrix),
    #[error("{0} is not positive definite")]
    NotPositiveDefinite(InfoMatrix),
    #[error("eigensolver did not converge")]
    EigenFailure,
    #[error("eta coordinates are identically zero")]
    ZeroEta,
    #[error("expected a two-dimensional problem, got p = {0}")]
    NotTwoDimensional(usize),
    #[error("eta ratio must be positive, got {0}")]
    NonpositiveRatio(f64),
    #[error("point violates the constraint set")]
    InfeasiblePoint,
    #[error("feasible interval is empty ({lo}, {hi})")]
    EmptyInterval { lo: f64, hi: f64 },
    #[error("objective is not finite at alpha = {0}")]
    NonFiniteValue(f64),
    #[error("invalid constraint spec: {0}")]
    InvalidConstraints(String),
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
    #[error("starting point is infeasible")]
    InfeasibleStart,
    #[error("model {0} does not provide an ML-step")]
    MissingMlStep(String),
    #[error("line search failed: {0}")]
    LineSearchFailure(Box<Error>),
    #[error("not a fixed point of the EM map: max |M(theta) - theta| = {0:e}")]
    NotAFixedPoint(f64),
    #[error("perturbation of coordinate {0} leaves the feasible region")]
    InfeasiblePerturbation(usize),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
