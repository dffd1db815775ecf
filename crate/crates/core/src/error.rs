use thiserror::Error;

/// Errors raised across the laboratory.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid closed form: {0}")]
    InvalidForm(String),
    #[error("grid functions live on different grids")]
    GridMismatch,
    #[error("{0} is not an eigenvalue of Z = H - Mx")]
    NotAnEigenvalue(String),
    #[error("not in L2: {0}")]
    NotInL2(String),
    #[error("integrand not integrable: {0}")]
    NotIntegrable(String),
    #[error("degenerate chain: {0}")]
    DegenerateChain(String),
    #[error("symbol pair violates the gluing condition f_minus(0) = f_plus(0)")]
    GluingViolation,
    #[error("index undefined: {0} lies in the essential spectrum")]
    IndexUndefined(String),
    #[error("invalid supports: {0}")]
    InvalidSupports(String),
    #[error("kernel is not lower triangular, so the operator is not in AlgLat(V)")]
    NotInAlgLat,
    #[error("basis conditioning cap exceeded: monomial basis supports N <= {cap}, got {got}")]
    ConditioningCap { cap: usize, got: usize },
    #[error("parse error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, LabError>;
