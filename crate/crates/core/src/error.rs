use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    /// The best-arm hardness needs a unique maximal mean.
    #[error("H_0 undefined: the maximal mean is attained by more than one arm")]
    UndefinedHardness,

    #[error("protocol violation by player {player}: {detail}")]
    ProtocolViolation { player: usize, detail: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for errors caused by user input rather than by a broken run.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_)
                | Error::InvalidInstance(_)
                | Error::UndefinedHardness
                | Error::Config(_)
                | Error::Json(_)
        )
    }
}
