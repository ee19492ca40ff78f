use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("state vector has a non-finite entry at index {index}")]
    NonFiniteState { index: usize },

    #[error("state is outside the feasible set: {0}")]
    Infeasible(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("preferred state for agent {agent} not found: gradient-mapping norm {residual:e} > {tol:e} after {iterations} iterations")]
    PreferredStateNotFound {
        agent: usize,
        residual: f64,
        tol: f64,
        iterations: usize,
    },

    #[error("non-finite {what} returned by cost model")]
    NonFiniteOracle { what: &'static str },

    #[error("individual rationality violated for agent {agent}: d - l(x) = {gap:e}")]
    IndividualRationalityViolated { agent: usize, gap: f64 },

    #[error("ideal point infeasible for agent {agent}: d = {disagreement}, ideal cost = {ideal}")]
    InfeasibleIdeal {
        agent: usize,
        disagreement: f64,
        ideal: f64,
    },

    #[error("KSBS search stalled: {0}")]
    BisectionStalled(String),

    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Prices(#[from] PriceError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Failures while reading a price CSV. Lines are 1-based.
#[derive(Debug, Error, PartialEq)]
pub enum PriceError {
    #[error("line {line}: malformed header: {reason}")]
    MalformedHeader { line: usize, reason: String },

    #[error("line {line}: date {date} is not after the previous row")]
    NonIncreasingDate { line: usize, date: String },

    #[error("line {line}: non-positive price {value} in column {column}")]
    NonPositivePrice {
        line: usize,
        column: usize,
        value: f64,
    },

    #[error("line {line}: expected {expected} fields, found {found}")]
    RaggedRow {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("line {line}: cannot parse {field:?}: {reason}")]
    BadField {
        line: usize,
        field: String,
        reason: String,
    },

    #[error("price series is empty")]
    Empty,
}
