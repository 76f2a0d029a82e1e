//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, HipError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HipError {
    #[error("grid must have at least 8 cells per side, got {0}")]
    GridTooSmall(usize),

    #[error("fields live on different grids ({left} vs {right} cells per side)")]
    GridMismatch { left: usize, right: usize },

    #[error("expected {expected} values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("non-finite value at node ({i}, {j})")]
    NonFinite { i: usize, j: usize },

    #[error("field must vanish on the boundary ring, found {value:e} at node ({i}, {j})")]
    NonzeroBoundary { i: usize, j: usize, value: f64 },

    #[error("Sobolev order must be nonnegative, got {0}")]
    NegativeOrder(f64),

    #[error("conductivity {value:e} at node ({i}, {j}) is below the lower bound {bound:e}")]
    NotPositive { i: usize, j: usize, value: f64, bound: f64 },

    #[error("exponent p = {0} is outside (0, 1]")]
    ExponentOutOfRange(f64),

    #[error("|grad u| = {value:e} at node ({i}, {j}) is below the floor {floor:e}")]
    GradientFloorViolated { i: usize, j: usize, value: f64, floor: f64 },

    #[error("solver did not converge: relative residual {residual:e} after {iterations} iterations")]
    SolverDiverged { iterations: usize, residual: f64 },

    #[error("eigen-iteration did not converge: last relative change {change:e} after {iterations} iterations")]
    EigenNotConverged { iterations: usize, change: f64 },

    #[error("path integration residual {residual:e} exceeds tolerance {tolerance:e}")]
    CurlResidual { residual: f64, tolerance: f64 },

    #[error("Gauss-Newton diverged: misfit increased on {0} consecutive damped steps")]
    Divergence(usize),

    #[error("iterate left the C2 neighborhood: distance {distance:e} > radius {radius:e}")]
    NeighborhoodExceeded { distance: f64, radius: f64 },

    #[error("no admissible exponent plan: {0}")]
    NoAdmissiblePlan(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed field dump: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for HipError {
    fn from(err: std::io::Error) -> Self {
        HipError::Io(err.to_string())
    }
}
