use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// The state has (numerically) vanished; nothing is left to normalize.
    #[error("degenerate state: norm^2 = {norm_sq:e} is below the decay floor")]
    DegenerateState { norm_sq: f64 },

    #[error("state is not normalized: norm^2 = {norm_sq}")]
    StateNotNormalized { norm_sq: f64 },

    #[error("invalid regenerator spec: {0}")]
    InvalidSpec(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("insufficient events: setting pair ({left}, {right}) received no events")]
    InsufficientEvents { left: String, right: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad input (configuration or arguments)
    /// as opposed to failures while running.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidSpec(_) | Error::InvalidParameter { .. } | Error::Config(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
