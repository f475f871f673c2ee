use thiserror::Error;

#[derive(Debug, Error)]
pub enum EuclidError {
    #[error("dimension {0} not in 1..=3")]
    InvalidDimension(usize),

    #[error("resolution 2^{k} not supported in dimension {d} (allowed {min}..={max})")]
    InvalidResolution { d: usize, k: u32, min: u32, max: u32 },

    #[error("invalid cube: {0}")]
    InvalidCube(String),

    #[error("truncation levels s = {s}, t = {t}: {reason}")]
    InvalidTruncation { s: f64, t: f64, reason: String },

    #[error("invalid modulus of continuity: {0}")]
    InvalidModulus(String),

    #[error("kernel rejected: {0}")]
    InvalidKernel(String),

    #[error("function is not supported on the top cube: cell {cell} carries {value}")]
    SupportOutsideTop { cell: usize, value: f64 },

    #[error("resolution too coarse: no point of the top cube admits two truncation levels")]
    ResolutionTooCoarse,

    #[error("{0}")]
    InvalidArgument(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, EuclidError>;
