use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("missing artifact from stage `{stage}`: {path} (run `echospot {stage}` first)")]
    MissingArtifact { stage: &'static str, path: PathBuf },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] echospot_core::Error),
}

impl CliError {
    /// Process exit status: 2 config, 3 numerical, 4 missing artifact.
    pub fn exit_code(&self) -> i32 {
        use echospot_core::Error as E;
        match self {
            Self::Config(_) => 2,
            Self::Numerical(_) => 3,
            Self::MissingArtifact { .. } => 4,
            Self::Io { .. } => 1,
            Self::Core(e) => match e {
                E::NumericalBreakdown { .. } | E::Degenerate(_) => 3,
                E::MissingRir { .. } => 4,
                E::Io(_) | E::Wav(_) => 1,
                _ => 2,
            },
        }
    }
}

pub(crate) fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
