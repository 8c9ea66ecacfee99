use std::io;
use std::path::{Path, PathBuf};

use hasprof_core::eval::EvalError;
use hasprof_core::features::FeatureError;
use hasprof_core::labels::LabelError;
use hasprof_core::learn::LearnError;
use hasprof_core::sim::{CorpusError, SimError};
use hasprof_core::DatasetError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("{}: no `# client_ip=` metadata line", .0.display())]
    MissingClientIp(PathBuf),
    #[error("{}: unsupported capture format: {what}", path.display())]
    UnsupportedFormat { path: PathBuf, what: String },
    #[error("{}: {source}", path.display())]
    Labels { path: PathBuf, source: LabelError },
    #[error("{}: malformed model file: {msg}", path.display())]
    Format { path: PathBuf, msg: String },
    #[error("{}: model file version {found}, this build reads version {supported}", path.display())]
    Version { path: PathBuf, found: u16, supported: u16 },
    #[error("{}: {msg}", path.display())]
    Config { path: PathBuf, msg: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn io_err(path: &Path) -> impl FnOnce(io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

pub(crate) fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, msg: msg.into() }
}
