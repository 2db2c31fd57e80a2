use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate point pair: |x - y| = {0:e}")]
    DegeneratePair(f64),

    #[error("unsupported dimension {0} (only 2 and 3 are supported)")]
    UnsupportedDimension(usize),

    #[error("out of safety region: {0}")]
    OutOfRegion(String),

    #[error("endpoint singularity at s = {0}")]
    EndpointSingularity(f64),

    #[error("insufficient data at boundary node {node}: {reason}")]
    InsufficientData { node: usize, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("overflow in exact coefficient arithmetic for n={n}, k={k}, l={l}")]
    Overflow { n: i64, k: i64, l: i64 },

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
