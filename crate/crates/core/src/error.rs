use thiserror::Error;

/// Errors raised across the estimation and forecasting pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("parameter outside its domain: {0}")]
    Domain(String),

    #[error("sample too short for estimation: need at least {needed} observations, have {have}")]
    InsufficientData { needed: usize, have: usize },

    #[error("numerical overflow at index {index}: {what}")]
    Overflow { index: usize, what: String },

    #[error("optimizer did not converge after {iterations} iterations (gradient norm {grad_norm:.3e}, objective {objective:.6})")]
    NonConvergence {
        best: Vec<f64>,
        objective: f64,
        grad_norm: f64,
        iterations: usize,
    },

    #[error("{failed} of {total} replicate fits failed")]
    ReplicateFailures { failed: usize, total: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
