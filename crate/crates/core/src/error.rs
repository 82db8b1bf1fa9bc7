use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A closed form was evaluated outside the parameter window it was derived for.
    #[error("{bound} outside its validity window: {detail}")]
    OutOfRange { bound: &'static str, detail: String },

    #[error("infeasible target: {0}")]
    Infeasible(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn out_of_range(bound: &'static str, detail: impl Into<String>) -> Error {
    Error::OutOfRange {
        bound,
        detail: detail.into(),
    }
}
