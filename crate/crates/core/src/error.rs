use thiserror::Error;

use crate::circuit::LevelLabel;

#[derive(Debug, Error)]
pub enum Error {
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("eigensolver did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("ambiguous eigenstate labeling: best overlap for |{label}> is {overlap:.4}")]
    LabelingAmbiguity { label: LevelLabel, overlap: f64 },

    #[error("singular detuning: {0}")]
    SingularDetuning(String),

    #[error("sub-step refinement did not converge: F(h) = {coarse:.12}, F(h/2) = {fine:.12}")]
    Resolution { coarse: f64, fine: f64 },

    #[error("non-finite gradient at iteration {iteration}")]
    NonFiniteGradient { iteration: usize },

    #[error("non-finite loss at training step {step}")]
    NonFiniteLoss { step: usize },

    #[error("environment step after episode end")]
    EpisodeFinished,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn precondition(msg: impl Into<String>) -> Error {
    Error::Precondition(msg.into())
}
