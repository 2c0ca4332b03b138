use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid probability vector: {0}")]
    InvalidProbability(String),

    #[error("invalid detector matrix: {0}")]
    InvalidDetector(String),

    #[error("invalid diagonal state: {0}")]
    InvalidState(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("fit did not converge: {reason} (residual {residual:.3e})")]
    FitNonConvergence { reason: String, residual: f64 },

    #[error("eigen-decomposition failed to converge after {0} iterations")]
    EigenNonConvergence(usize),

    #[error("unusable phase {theta}: {reason}")]
    UnusablePhase { theta: f64, reason: String },

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
