use std::path::PathBuf;

/// Errors produced by the core library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{0}: file contains no edges")]
    EmptyInput(PathBuf),
    #[error("node count exceeds the supported maximum of {0}")]
    NodeOverflow(usize),
    #[error("unknown node id {0:?}")]
    UnknownNode(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("AUC is undefined: scores contain only one class")]
    DegenerateAuc,
    #[error("activation is not monotone: node {0:?} active at t but inactive at t+delta")]
    NonMonotone(String),
    #[error("training diverged at epoch {epoch} (loss is not finite)")]
    Diverged {
        epoch: usize,
        trace: Box<crate::learner::TrainTrace>,
    },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
    #[error("singular linear system in propagation resolvent")]
    Singular,
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
