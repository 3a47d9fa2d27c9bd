use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid probability vector: {0}")]
    InvalidDistribution(String),

    #[error("invalid distortion matrix: {0}")]
    InvalidDistortion(String),

    #[error("invalid energy distribution: {0}")]
    InvalidEnergy(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("inverse temperature must be positive, got {0}")]
    NonPositiveBeta(f64),

    #[error("invalid tree shape: {0}")]
    InvalidShape(String),

    #[error("symmetry condition violated: {0}")]
    SymmetryViolation(String),

    #[error("rate {0} nats is not ln d for an integer d >= 2")]
    RateNotLogInteger(f64),

    #[error("malformed bitstream: {0}")]
    MalformedBitstream(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
