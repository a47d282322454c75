use thiserror::Error;

/// Structural problems detected while building or validating a model.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("duplicate variable name `{0}`")]
    DuplicateVariable(String),
    #[error("duplicate row name `{0}`")]
    DuplicateRow(String),
    #[error("invalid name `{0}`: names must be non-empty and contain no whitespace")]
    InvalidName(String),
    #[error("variable `{name}` has empty domain [{lower}, {upper}]")]
    EmptyDomain { name: String, lower: f64, upper: f64 },
    #[error("non-finite coefficient {value} in `{context}`")]
    NonFinite { context: String, value: f64 },
    #[error("variable id {0} out of range")]
    UnknownVariable(usize),
}

/// Failures of the simplex method itself (as opposed to infeasible or
/// unbounded models, which are reported through the status).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("iteration limit of {0} reached")]
    IterationLimit(usize),
}

/// Errors from [`crate::solve_milp`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MilpError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("integer variable `{0}` needs finite bounds")]
    UnboundedInteger(String),
}
