use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("variable `{0}` is not part of the polynomial space")]
    UnknownVariable(String),

    #[error("variable space mismatch: {0}")]
    SpaceMismatch(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid problem document: {0}")]
    InvalidProblem(String),

    #[error("multiplier order {order} is too small for a target of degree {degree}")]
    OrderTooSmall { order: usize, degree: usize },

    #[error("malformed SDP: {0}")]
    MalformedSdp(String),

    #[error("SDP backend failure: {0}")]
    Backend(String),

    #[error("solution is not feasible (status {0})")]
    NotFeasible(String),

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("certificate does not belong to this problem (fingerprint {cert} vs {problem})")]
    FingerprintMismatch { cert: String, problem: String },

    #[error("certificate is missing data: {0}")]
    MissingData(String),

    #[error("unsupported request: {0}")]
    Unsupported(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
