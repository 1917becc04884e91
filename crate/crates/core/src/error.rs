use thiserror::Error;

/// Errors produced by the inference library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("hyperparameter fit failed: {0}")]
    FitFailure(String),

    #[error("integration diverged at t = {time}")]
    Divergence { time: f64 },

    #[error("vector field singularity: {0}")]
    Singularity(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
