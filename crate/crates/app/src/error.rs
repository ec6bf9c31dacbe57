use std::path::PathBuf;

use memorability_core::CoreError;
use memorability_dsp::DspError;
use memorability_features::FeatureError;
use memorability_learn::LearnError;
use thiserror::Error;

pub type Result<T, E = AppError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum AppError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Invalid(String),
}

impl AppError {
    pub fn kind(&self) -> &'static str {
        match self {
            AppError::Core(e) => e.kind(),
            AppError::Dsp(e) => e.kind(),
            AppError::Features(e) => e.kind(),
            AppError::Learn(e) => e.kind(),
            AppError::Io { .. } => "io",
            AppError::Json(_) => "json",
            AppError::Invalid(_) => "invalid_input",
        }
    }

    /// One-line JSON for stderr.
    pub fn to_json_line(&self) -> String {
        serde_json::json!({ "error": self.kind(), "message": self.to_string() }).to_string()
    }
}

pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> AppError {
    AppError::Io {
        path: path.into(),
        source,
    }
}
