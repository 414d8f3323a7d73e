use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("holdout set has no examples of class {class}")]
    InsufficientHoldout { class: usize },

    #[error("confusion matrix is singular (sigma_min = {sigma_min:e}, floor = {floor:e})")]
    SingularConfusion { sigma_min: f64, floor: f64 },

    #[error("all reweighted probabilities are zero")]
    DegenerateReweight,

    #[error("importance weight denominator is zero for class {class} at round {round}")]
    DegenerateWeight { class: usize, round: usize },

    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    #[error("class {class} pool exhausted after {drawn} draws")]
    DataExhausted { class: usize, drawn: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("softmax stream is incomplete: {0}")]
    IncompleteStream(String),

    #[error("round {round} exceeds horizon {horizon}")]
    HorizonExceeded { round: usize, horizon: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
