use thiserror::Error;

/// Errors raised by lattice construction, decoding and rate evaluation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("enumeration budget exceeded: cost {cost} > limit {limit}")]
    EnumerationBudgetExceeded { cost: u128, limit: u128 },

    #[error("rejection sampler gave up after {tries} draws")]
    RejectionBudgetExceeded { tries: usize },

    #[error("lattices are not nested")]
    NotNested,

    #[error("{0} is not a prime")]
    NotPrime(u64),

    #[error("invalid ranks: {0}")]
    InvalidRanks(String),

    #[error("generator rows are linearly dependent mod {0}")]
    RankDeficient(u64),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("point is not a codeword of the coarse fundamental region")]
    NotACodeword,

    #[error("negative argument {0}")]
    NegativeArgument(f64),

    #[error("scenario violation: {0}")]
    ScenarioViolation(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
