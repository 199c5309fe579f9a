use thiserror::Error;

use crate::units::Dim;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CqmError {
    #[error("dimension mismatch in {context}: {left} vs {right}")]
    DimensionMismatch { context: String, left: Dim, right: Dim },
    #[error("division by zero")]
    DivisionByZero,
    #[error("non-finite value {0}")]
    NonFinite(String),
    #[error("jet order {0} out of range (max 3)")]
    OrderOutOfRange(usize),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("syntax error at line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("unknown identifier '{0}'")]
    UnknownIdentifier(String),
    #[error("metric not positive definite at {0:?}")]
    NotPositiveDefinite([f64; 4]),
    #[error("matrix is not a traceless anti-Hermitian element")]
    NotInL0,
    #[error("matrix is not antisymmetric (residual {0:e})")]
    NotAntisymmetric(f64),
    #[error("inconsistent spin-connection system (residual {0:e})")]
    InconsistentSystem(f64),
    #[error("bracket evaluation requires the chart-adapted observer, got '{0}'")]
    NonAdaptedObserver(String),
    #[error("field is not Hermitian (residual {0:e})")]
    NotHermitian(f64),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("metric is not static (d0 sqrt|g| = {0:e})")]
    NonStaticMetric(f64),
    #[error("linear solver did not converge (residual {0:e})")]
    SolverDivergence(f64),
    #[error("scenario error: {0}")]
    Scenario(String),
}

pub type Result<T> = std::result::Result<T, CqmError>;
