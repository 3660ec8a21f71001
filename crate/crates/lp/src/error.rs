use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("variable {name}: invalid bounds [{lower}, {upper}]")]
    InvalidBounds {
        name: String,
        lower: f64,
        upper: f64,
    },
    #[error("unknown variable index {0}")]
    UnknownVariable(usize),
    #[error("unknown constraint index {0}")]
    UnknownRow(usize),
    #[error("row {0} references the same variable twice")]
    DuplicateTerm(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("solution is not optimal ({0})")]
    NotOptimal(String),
    #[error("numerical breakdown: {0}")]
    Numerical(String),
    #[error("iteration limit of {0} reached")]
    IterationLimit(usize),
}
