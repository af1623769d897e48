use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, configuration or scenario files.
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Pipeline(#[from] countcast_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub(crate) fn config(e: countcast_core::Error) -> Self {
        CliError::Usage(e.to_string())
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// 1 usage, 2 data, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Pipeline(e) if e.is_numeric() => 3,
            CliError::Pipeline(_) | CliError::Io { .. } => 2,
        }
    }
}
