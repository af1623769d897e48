use thiserror::Error;

/// Errors produced anywhere in the forecasting pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("input is empty")]
    EmptyInput,

    #[error("duplicate row for date {date} and region {region}")]
    DuplicateRow { date: String, region: String },

    #[error("missing column `{0}` in header")]
    MissingColumn(String),

    #[error("insufficient history: {available} days available, need more than {required}")]
    InsufficientHistory { available: usize, required: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown series: region `{region}`, feature `{feature}`")]
    UnknownSeries { region: String, feature: String },

    #[error("series keys do not match: {0}")]
    KeyMismatch(String),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for failures that come from arithmetic rather than from inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonFinite(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
