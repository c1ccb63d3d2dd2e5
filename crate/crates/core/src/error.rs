use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid query `{name}`: {reason}")]
    InvalidQuery { name: String, reason: String },

    #[error("the workload is empty")]
    EmptyWorkload,

    #[error("no statistic recorded for atom pattern `{0}`")]
    MissingStatistic(String),

    #[error("mode `{0}` requires a schema")]
    SchemaRequired(String),

    #[error("workload generation failed: {0}")]
    Generation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

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

    pub(crate) fn invalid_query(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidQuery {
            name: name.to_string(),
            reason: reason.into(),
        }
    }

    /// An I/O error that names the file involved.
    pub fn at_path(path: &std::path::Path, e: std::io::Error) -> Self {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    }

    /// Whether the error stems from user input rather than a bug.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Invariant(_) | Error::MissingStatistic(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
