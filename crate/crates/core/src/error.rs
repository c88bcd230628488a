use thiserror::Error;

/// Errors produced across the portfolio toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("series are not aligned: {0}")]
    Alignment(String),

    #[error("asset {asset} has zero return variance")]
    DegenerateAsset { asset: usize },

    #[error("integer range 0 has no binary encoding")]
    EmptyEncoding,

    #[error("encoding error: {0}")]
    Encoding(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("infeasible problem: {0}")]
    InfeasibleProblem(String),

    #[error("problem generation failed: {0}")]
    Generation(String),

    #[error("{n_qubits} qubits exceeds the limit of {limit}")]
    ResourceLimit { n_qubits: usize, limit: usize },

    #[error("objective returned {value} at {params:?}")]
    Objective { params: Vec<f64>, value: f64 },

    #[error("allocation spends no capital")]
    DegenerateAllocation,

    #[error("join error: {0}")]
    Join(String),

    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
