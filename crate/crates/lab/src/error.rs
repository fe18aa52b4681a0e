use thiserror::Error;

/// Failures of the experiment layer.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("config: {0}")]
    Parse(String),

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("ε = {eps}, state {state}: {source}")]
    Cell {
        eps: f64,
        state: usize,
        #[source]
        source: boa_core::Error,
    },

    #[error(transparent)]
    Core(#[from] boa_core::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn field(field: &str, message: impl Into<String>) -> LabError {
    LabError::Config { field: field.into(), message: message.into() }
}
