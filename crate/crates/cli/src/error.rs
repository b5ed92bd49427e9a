use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error at `{path}`: {message}")]
    Validation { path: String, message: String },

    #[error("unknown figure `{0}`")]
    UnknownFigure(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("{0} did not converge")]
    NotConverged(String),

    #[error(transparent)]
    Core(#[from] cachepart::Error),

    #[error("I/O error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Validation { path: path.into(), message: message.into() }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io { path: path.as_ref().display().to_string(), source }
    }

    /// Process exit status: 2 for bad input, 3 for non-convergence, 4 for
    /// I/O failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_)
            | CliError::Validation { .. }
            | CliError::UnknownFigure(_)
            | CliError::UnknownScenario(_) => 2,
            CliError::NotConverged(_) => 3,
            CliError::Core(e) => match e {
                cachepart::Error::NoConvergence { .. } | cachepart::Error::Stalled { .. } => 3,
                _ => 2,
            },
            CliError::Io { .. } => 4,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
