use std::path::PathBuf;

/// Errors raised across the library and the CLI.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller broke an operation's precondition (shapes, ranges, sizes).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A configuration block failed validation.
    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },

    /// Training produced non-finite values.
    #[error("training error: {0}")]
    Training(String),

    /// A downstream command ran before the stage that writes its input.
    #[error("missing upstream stage: {}", .0.display())]
    MissingUpstream(PathBuf),

    /// An artifact would be replaced without `--overwrite`.
    #[error("refusing to overwrite existing artifact {} (pass --overwrite)", .0.display())]
    WouldOverwrite(PathBuf),

    /// A persisted artifact could not be parsed.
    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }

    /// Short machine-readable tag used by the CLI error line and the C API.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Contract(_) => "contract",
            Error::Config { .. } => "config",
            Error::Training(_) => "training",
            Error::MissingUpstream(_) => "missing_upstream",
            Error::WouldOverwrite(_) => "would_overwrite",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
