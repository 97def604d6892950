use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Malformed input document.
    #[error("parse error: {0}")]
    Parse(String),

    /// Well-formed input that violates a model invariant.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("outcome space too large: {count} joint outcomes exceed the cap of {cap}")]
    OutcomeExplosion { count: u128, cap: usize },

    /// Some outcome has a nonpositive wealth factor `1 + sum_j f_j k_ij`.
    #[error("growth domain violated: outcome {outcome} has wealth factor {wealth}")]
    DomainViolation { outcome: usize, wealth: f64 },

    #[error("invalid constraint policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("{constraints} constraints would require 2^{constraints} systems; the cap is {cap} constraints")]
    EnumerationCapExceeded { constraints: usize, cap: usize },

    #[error("no viable solution among {attempted} systems ({converged} converged)")]
    NoViableSolution { attempted: usize, converged: usize },

    #[error("grid of {points} points exceeds the limit of {limit}")]
    GridTooLarge { points: u128, limit: u128 },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
