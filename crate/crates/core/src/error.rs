use std::io;

use thiserror::Error;

pub type Result<T, E = GgdError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum GgdError {
    /// A layer or op received an input whose shape does not match its signature.
    #[error("dimension error in {layer}: {detail}")]
    Dimension { layer: String, detail: String },

    #[error("numeric error: {0}")]
    Numeric(String),

    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("truncated input: {0}")]
    Truncated(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch}, step {step}: {model} loss = {loss}")]
    Divergence {
        epoch: usize,
        step: usize,
        model: String,
        loss: f64,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl GgdError {
    pub(crate) fn dim(layer: impl Into<String>, detail: impl Into<String>) -> Self {
        GgdError::Dimension {
            layer: layer.into(),
            detail: detail.into(),
        }
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        GgdError::Contract(msg.into())
    }
}
