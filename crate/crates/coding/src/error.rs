use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("alist line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("inconsistent degrees: {0}")]
    InconsistentDegrees(String),
    #[error("infeasible code parameters: {0}")]
    InfeasibleParameters(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
