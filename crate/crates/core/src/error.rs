use thiserror::Error;

pub type Result<T> = std::result::Result<T, FewError>;

#[derive(Debug, Error)]
pub enum FewError {
    /// A tree references a variable outside the attribute range.
    #[error("structural error: {0}")]
    Structural(String),

    #[error("parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },

    /// Labels (or regression target) carry fewer than two distinct values.
    #[error("degenerate target: {0}")]
    DegenerateTarget(String),

    #[error("metric `{0}` has no per-case error decomposition")]
    UnsupportedMetric(String),

    #[error("shape mismatch: expected {expected} columns, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("failed to load {path}: {message}")]
    Load { path: String, message: String },

    #[error("harness error: {0}")]
    Harness(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl FewError {
    /// True for errors caused by the input data rather than by the program
    /// or its configuration.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            FewError::Load { .. } | FewError::DegenerateTarget(_) | FewError::Shape { .. } | FewError::Csv(_)
        )
    }
}
