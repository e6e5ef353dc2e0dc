use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),

    #[error("invalid pose: {0}")]
    InvalidPose(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("train pose set is empty")]
    EmptyTrainPoses,

    #[error("budget {budget} exceeds available candidates ({available})")]
    BudgetExceedsPool { budget: usize, available: usize },

    #[error("scene union is empty; coverage fraction is undefined")]
    EmptySceneUnion,

    #[error("selection is empty; cannot resample to a positive budget")]
    EmptySelection,

    #[error("shape mismatch: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("{context}: line {line}: {msg}")]
    Parse {
        context: String,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn parse(context: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            line,
            msg: msg.into(),
        }
    }

    pub fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
