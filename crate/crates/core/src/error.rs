use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("zero-length transform")]
    ZeroLengthTransform,
    #[error("variance must be finite and non-negative, got {0}")]
    InvalidVariance(f64),
    #[error("invalid modem configuration: {0}")]
    InvalidModem(String),
    #[error("expected {expected} bits, got {got}")]
    BitCount { expected: usize, got: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("undefined PAPR: frame has zero power")]
    UndefinedPapr,
    #[error("invalid noise configuration: {0}")]
    InvalidNoise(String),
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
    #[error("invalid threshold {0}: must be positive and finite")]
    InvalidThreshold(f64),
    #[error("empty sample set")]
    EmptySamples,
    #[error("zero trials requested")]
    ZeroTrials,
    #[error("analytic model out of validity range (E_o - 2R^2 = {0:e})")]
    AnalyticOutOfRange(f64),
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error("every threshold in the search grid failed to evaluate")]
    AllGridPointsFailed,
    #[error("grid point m={m}, p={p}, sinr={sinr_db} dB: {source}")]
    GridPoint {
        m: usize,
        p: f64,
        sinr_db: f64,
        #[source]
        source: Box<Error>,
    },
}
