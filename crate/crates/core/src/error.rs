use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("no catalog entry for ({n}, {k})")]
    NotInCatalog { n: usize, k: usize },
    #[error("invalid code: {0}")]
    InvalidCode(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("constant-weight sequence has weight {got}, expected {expected}")]
    WeightMismatch { expected: usize, got: usize },
    #[error("rank out of range for C({n}, {w})")]
    RankOutOfRange { n: usize, w: usize },
    #[error("no feasible design: {0}")]
    Infeasible(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
