use thiserror::Error;

use crate::linalg::LinalgError;
use crate::problem::{EvalError, ParseError};

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("infeasible point: {0}")]
    Infeasible(String),
    #[error("constraint {index} cannot be classified: {reason}")]
    Classification { index: usize, reason: String },
    #[error("`{0}` uses abs, which is not twice continuously differentiable")]
    NonSmooth(String),
    #[error("Newton iteration stopped after {iterations} iterations with residual {residual:e}")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("selector enumeration needs 2^{size} patterns, cap is 2^{cap}")]
    EnumerationCap { size: usize, cap: usize },
    #[error("no feasible grid point: {0}")]
    EmptyGrid(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("invalid report: {0}")]
    Report(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
