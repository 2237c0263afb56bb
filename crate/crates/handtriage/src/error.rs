use std::io;
use std::path::{Path, PathBuf};

use handtriage_core::bootstrap::BootstrapError;
use handtriage_core::evaluator::ConfigError;
use handtriage_core::formats::ManifestError;
use handtriage_core::triage::TriageError;
use handtriage_core::FormatError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: {source}", path.display())]
    Format {
        path: PathBuf,
        #[source]
        source: FormatError,
    },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{}: cannot read image size: {reason}", path.display())]
    ImageSize { path: PathBuf, reason: String },
    #[error("round {round} {stage} command failed ({status}): {command}")]
    Command {
        round: usize,
        stage: &'static str,
        command: String,
        status: String,
    },
    #[error("run {0} not found")]
    RunNotFound(String),
    #[error("frame {frame} not found in run {run}")]
    FrameNotFound { run: String, frame: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Bootstrap(#[from] BootstrapError),
    #[error(transparent)]
    Triage(#[from] TriageError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn io_err(path: &Path) -> impl FnOnce(io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn format_err(path: &Path) -> impl FnOnce(FormatError) -> Error + '_ {
    move |source| Error::Format {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn json_err(path: &Path) -> impl FnOnce(serde_json::Error) -> Error + '_ {
    move |source| Error::Json {
        path: path.to_path_buf(),
        source,
    }
}
