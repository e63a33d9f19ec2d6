use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("diffusion step {step} outside 1..={max}")]
    StepOutOfRange { step: usize, max: usize },

    #[error("non-finite value in {context}")]
    Numeric { context: String },

    #[error("sample {sample}, step {step}: {source}")]
    Sampling {
        sample: usize,
        step: usize,
        source: Box<Error>,
    },

    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("empty batch")]
    EmptyBatch,

    #[error("goal guidance requested but no goals were supplied")]
    MissingGoals,

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by non-finite arithmetic.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::Numeric { .. } | Error::Diverged { .. } => true,
            Error::Sampling { source, .. } => source.is_numeric(),
            _ => false,
        }
    }

    pub(crate) fn numeric(context: impl Into<String>) -> Self {
        Error::Numeric {
            context: context.into(),
        }
    }
}
