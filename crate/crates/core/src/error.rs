use adis_nlp::{NlpError, SolveTrace};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("i/o error on {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input {path}: {message}")]
    Format { path: String, message: String },

    #[error("degenerate spectrum: eigenvalue {index} ({eigenvalue:e}) does not exceed the noise floor {sigma2:e}")]
    DegenerateSpectrum {
        index: usize,
        eigenvalue: f64,
        sigma2: f64,
    },

    #[error("non-stationary AR fit on channel {channel}")]
    NonStationary { channel: usize },

    #[error("component {component}: all {} seed solves failed to converge", traces.len())]
    ComponentFailed {
        component: usize,
        traces: Vec<SolveTrace>,
    },

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<CoreError>,
    },

    #[error(transparent)]
    Nlp(#[from] NlpError),
}

impl CoreError {
    pub(crate) fn at(self, stage: &'static str) -> Self {
        CoreError::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping stage tags.
    pub fn root(&self) -> &CoreError {
        match self {
            CoreError::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// Name of the outermost stage tag, if any.
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            CoreError::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
