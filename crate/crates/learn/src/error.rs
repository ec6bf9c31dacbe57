use memorability_core::CoreError;
use thiserror::Error;

pub type Result<T, E = LearnError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("input contains non-finite values")]
    NonFinite,
    #[error("solver did not converge within {0} iterations")]
    NoConvergence(usize),
    #[error("training diverged at epoch {0}")]
    Divergence(usize),
    #[error("parameter out of range: {0}")]
    Range(String),
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error("{n} rows cannot be split into {folds} folds")]
    FoldTooSmall { n: usize, folds: usize },
    #[error("singular system")]
    Singular,
    #[error("inconsistent features: {0}")]
    InconsistentFeatures(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("model serialization: {0}")]
    Json(#[from] serde_json::Error),
}

impl LearnError {
    pub fn kind(&self) -> &'static str {
        match self {
            LearnError::NonFinite => "non_finite",
            LearnError::NoConvergence(_) => "no_convergence",
            LearnError::Divergence(_) => "divergence",
            LearnError::Range(_) => "range",
            LearnError::Degenerate(_) => "degenerate",
            LearnError::FoldTooSmall { .. } => "fold_too_small",
            LearnError::Singular => "singular",
            LearnError::InconsistentFeatures(_) => "inconsistent_features",
            LearnError::Shape(_) => "shape",
            LearnError::Core(e) => e.kind(),
            LearnError::Json(_) => "json",
        }
    }
}
