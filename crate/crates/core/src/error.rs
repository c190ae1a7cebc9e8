use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid point: {0}")]
    InvalidPoint(String),
    #[error("unsupported BBOB function f{0:02}")]
    UnsupportedFunction(u32),
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
    #[error("contract violation: {0}")]
    ContractViolation(String),
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("replay miss for request digest {0}")]
    ReplayMiss(String),
    #[error("evaluation budget of {0} exhausted")]
    BudgetExhausted(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::ContractViolation(msg.into())
}
