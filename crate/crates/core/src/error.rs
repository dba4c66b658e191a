use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid Fock truncation {0}: need at least 2 levels")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("state is not pure (purity {purity:.3e})")]
    NotPure { purity: f64 },

    #[error("operator is not positive semidefinite (smallest eigenvalue {min_eigenvalue:.3e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("numerical inconsistency: {0}")]
    Numerical(String),

    #[error("kernel normalization {total:.6} outside 1 ± {tolerance:e}")]
    KernelNormalization { total: f64, tolerance: f64 },

    #[error("truncation leakage {leakage:.3e} exceeds bound {bound:.1e}; increase n_max")]
    TruncationLeakage { leakage: f64, bound: f64 },

    #[error("rejection envelope violated at (x={x:.4}, p={p:.4}): density/envelope ratio {ratio:.4}")]
    EnvelopeFailure { x: f64, p: f64, ratio: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
