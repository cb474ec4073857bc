use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty gradient")]
    EmptyGradient,

    #[error("non-finite gradient entry at index {index}")]
    NonFiniteGradient { index: usize },

    #[error("invalid quantizer range [{lo}, {hi}]")]
    InvalidRange { lo: f64, hi: f64 },

    #[error("quantizer needs at least one bit (got {0})")]
    InvalidBits(u32),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("{0} outside the path-loss model's validity range")]
    OutOfValidity(String),

    #[error("enumeration bound exceeded: K = {k} > {max}")]
    EnumerationBound { k: usize, max: usize },

    #[error("quadrature oracle supports at most {max} devices (got {k})")]
    OracleTooLarge { k: usize, max: usize },

    #[error("quadrature order must be an even number >= 32 (got {0})")]
    QuadratureOrder(usize),

    #[error("device index {index} out of range for K = {k}")]
    DeviceIndex { index: usize, k: usize },

    #[error("invalid aggregation context: {0}")]
    InvalidContext(String),

    #[error("all channel magnitudes are zero")]
    ZeroChannel,

    #[error("step size violates smoothness condition (L*gamma = {0})")]
    SmoothnessViolated(f64),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("impossible partition: {0}")]
    Partition(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("non-finite {metric} at round {round}")]
    NonFiniteMetric { round: usize, metric: &'static str },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
