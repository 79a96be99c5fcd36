use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("zero denominator")]
    ZeroDenominator,

    #[error("invalid bracket: {0}")]
    InvalidBracket(String),

    #[error("point {point} lies outside [{lo}, {hi}]")]
    OutOfDomain { point: String, lo: String, hi: String },

    /// A certificate the operation depends on is absent.
    #[error("missing witness: {0}")]
    MissingWitness(String),

    /// A value contradicted a certificate it was supposed to satisfy.
    #[error("witness violated: {0}")]
    WitnessViolation(String),

    #[error("parse error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("quadrature needs {requested} cells, ceiling is {limit}")]
    CellLimit { requested: String, limit: u64 },

    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),

    #[error("undefined growth slope: {0}")]
    DegenerateGrowth(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
