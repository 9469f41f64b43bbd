use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("neuron index {index} out of range for a network of {n} neurons")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("thinning acceptance ratio {ratio} exceeds 1 at t = {t}")]
    DominatingRateViolated { ratio: f64, t: f64 },

    #[error("replica {replica} failed: {source}")]
    Replica {
        replica: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
