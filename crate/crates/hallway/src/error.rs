use std::path::{Path, PathBuf};

use hallway_core::evalloop::EvalError;
use hallway_core::models::TrainError;
use hallway_core::nn::NnError;
use hallway_core::pipeline::PipelineError;
use hallway_core::recorder::RecordError;
use hallway_core::simworld::WorldError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },
    #[error("missing image for ID {0}")]
    MissingImage(u64),
    #[error("image without a label row for ID {0}")]
    OrphanImage(u64),
    #[error("labels.csv line {line}: {msg}")]
    Row { line: usize, msg: String },
    #[error("cannot listen on {addr}: {source}")]
    Listen {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown map {0:?}")]
    UnknownMap(String),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

impl Error {
    pub fn io(path: impl AsRef<Path>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.as_ref().to_path_buf();
        move |source| Error::Io { path, source }
    }

    pub fn format(path: impl AsRef<Path>, msg: impl ToString) -> Self {
        Error::Format { path: path.as_ref().to_path_buf(), msg: msg.to_string() }
    }

    /// Training blew up rather than the inputs being wrong.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Train(TrainError::NonFinite { .. }))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
