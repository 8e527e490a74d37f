use std::path::PathBuf;

/// Errors raised anywhere in the screening pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("manifest {section}[{row}].{field}: {message}")]
    Manifest {
        section: &'static str,
        row: usize,
        field: &'static str,
        message: String,
    },

    #[error("manifest: {0}")]
    ManifestEmpty(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Audio { path: PathBuf, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("scoring: {0}")]
    Scoring(String),

    #[error("embedding backend {backend}: {message}")]
    Backend { backend: String, message: String },

    #[error("dual solver did not converge within {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidInput(message.into())
    }

    /// True for errors caused by bad user input (manifests, configs, arguments)
    /// as opposed to failures while running a valid request.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Manifest { .. }
                | Error::ManifestEmpty(_)
                | Error::InvalidInput(_)
                | Error::Config(_)
                | Error::Scoring(_)
                | Error::Json(_)
        )
    }
}
