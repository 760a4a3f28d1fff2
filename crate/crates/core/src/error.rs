use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Bad parameters, schema, or run configuration.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    /// No sample fell inside the (margin-extended) analysis band.
    #[error("empty band: no samples inside {0}")]
    EmptyBand(String),

    /// No grid cell met the time/window/frequency support minima.
    #[error("insufficient support: {0}")]
    InsufficientSupport(String),

    #[error("empty input: {0}")]
    EmptyInput(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the data rather than by the run setup.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::EmptyBand(_) | Error::InsufficientSupport(_) | Error::EmptyInput(_)
        )
    }
}
