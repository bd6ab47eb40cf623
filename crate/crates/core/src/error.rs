use thiserror::Error;

/// Errors surfaced by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violated its documented domain.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Constellation specification is malformed.
    #[error("invalid constellation: {0}")]
    InvalidConstellation(String),

    /// Scenario configuration failed to parse or validate.
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    /// Training produced a NaN or infinite gradient.
    #[error("non-finite gradient on {context} (round {round}, epoch {epoch})")]
    NonFiniteGradient {
        context: String,
        round: usize,
        epoch: usize,
    },

    /// Some satellites can never deliver their models.
    #[error("unreachable satellites: {diagnosis}")]
    Unreachable { diagnosis: String },

    /// Malformed dataset cache file.
    #[error("dataset cache: {0}")]
    DatasetFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
