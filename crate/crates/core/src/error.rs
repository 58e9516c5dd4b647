use thiserror::Error;

/// Errors surfaced by the library.
///
/// Contract violations indicate a caller broke a documented precondition;
/// internal-consistency errors indicate the engine derived two results that
/// cannot both hold and are always worth a bug report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("contract violation: {0}")]
    ContractViolation(String),
    #[error("internal consistency: {0}")]
    InternalConsistency(String),
}

pub type Result<T> = std::result::Result<T, Error>;
