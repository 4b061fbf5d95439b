use std::path::PathBuf;

use crate::gp::GpHyperparams;
use crate::room::Point2;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid layout: {0}")]
    Layout(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },

    #[error("GP fit failed: kernel matrix not positive definite at {hyperparams:?}")]
    ModelFit { hyperparams: GpHyperparams },

    #[error("GP training set invalid: {0}")]
    TrainingData(String),

    #[error("no trained motion model for goal `{0}`")]
    MissingModel(String),

    #[error("unknown goal `{0}`")]
    UnknownGoal(String),

    #[error("cannot generate a path from {start} to goal `{goal}`: {reason}")]
    Generation {
        start: Point2,
        goal: String,
        reason: String,
    },

    #[error("scenario {index} failed: {source}")]
    Scenario {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn file(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::File {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
