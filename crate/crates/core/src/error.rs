use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("corpus `{corpus}` entry {entry}: {message}")]
    Conversion {
        corpus: String,
        entry: usize,
        message: String,
    },

    #[error("invalid tag `{0}`")]
    InvalidTag(String),

    #[error("tag `{0}` is not in the tag set")]
    UnknownTag(String),

    #[error("invalid token: {0}")]
    InvalidToken(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("corpus too small: {got} sentences, need at least {need}")]
    TooSmall { got: usize, need: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error("model file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn shape(message: impl Into<String>) -> Self {
        Error::Shape(message.into())
    }
}
