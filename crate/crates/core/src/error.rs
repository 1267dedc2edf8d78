use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {0} lies outside [0, 1]")]
    OutOfDomain(f64),

    #[error("resolution mismatch: {left} vs {right}")]
    ResolutionMismatch { left: usize, right: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operator is not symmetric: {0}")]
    Asymmetric(String),

    #[error("support too large for brute force: {len} atoms (max {max})")]
    SupportTooLarge { len: usize, max: usize },

    #[error("filter coefficient {value} at {location} exceeds 1 in magnitude")]
    Normalization { value: f64, location: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("analytic signals cannot be serialized")]
    NotSerializable,

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
