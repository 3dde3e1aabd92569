use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error)]
pub enum KerrError {
    #[error("polynomial order {order} exceeds the supported maximum {max}")]
    CutoffExceeded { order: usize, max: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("truncation error: {0}")]
    Truncation(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("numerical inconsistency: {0}")]
    Numerical(String),

    #[error("sequential protocol diverged at epoch {epoch}: |mu| = {mu_abs:.4} exceeds {limit:.4}")]
    Diverged { epoch: usize, mu_abs: f64, limit: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, KerrError>;
