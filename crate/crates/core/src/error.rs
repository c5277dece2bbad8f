use thiserror::Error;

/// Errors raised by the entropy engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed instance: {0}")]
    Malformed(String),

    #[error("invalid bundle: {0}")]
    InvalidBundle(String),

    #[error("empty coordinate span")]
    EmptySpan,

    #[error("horizon exhausted: cannot push forward a horizon-{0} measure")]
    HorizonExhausted(usize),

    #[error("horizon mismatch: need {needed}, have {available}")]
    HorizonMismatch { needed: usize, available: usize },

    #[error("cover does not cover fiber {omega}: word {word} is in no element")]
    UniverseUncovered { omega: usize, word: String },

    #[error("size guard exceeded: {what} = {size} > {limit}")]
    SizeGuard {
        what: &'static str,
        size: u128,
        limit: u128,
    },

    #[error("enumeration guard exceeded: {count} candidates > {limit} (partial minimum {partial_min:?})")]
    EnumerationGuard {
        count: u128,
        limit: u128,
        partial_min: Option<f64>,
    },

    #[error("{what} did not converge (residual {residual:e})")]
    NonConvergence { what: &'static str, residual: f64 },

    #[error("measure is not invariant (residual {0:e})")]
    NotInvariant(f64),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("partition {index} is not finer than the reference cover")]
    FinerThanViolation { index: usize },

    #[error("{0} is not a partition")]
    NotPartition(String),

    #[error("cover is not product-form")]
    NotProductForm,

    #[error("partition list is empty")]
    EmptyPartitionList,

    #[error("hypothesis violated: {}", .0.join("; "))]
    Hypothesis(Vec<String>),

    #[error("negative probability {value} at index {index}")]
    NegativeProbability { index: usize, value: f64 },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("separated-set bound violated at fiber {omega}: {size} < {bound}")]
    BoundViolated {
        omega: usize,
        size: usize,
        bound: usize,
    },

    #[error("empty support in fiber {0}")]
    EmptySupport(usize),

    #[error("rejection budget of {attempts} draws exhausted while sampling {what}")]
    RejectionBudget { what: &'static str, attempts: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown {kind} {name:?}")]
    UnknownName { kind: &'static str, name: String },
}

pub type Result<T> = std::result::Result<T, Error>;
