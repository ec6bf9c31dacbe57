use std::path::PathBuf;

use memorability_core::CoreError;
use memorability_dsp::DspError;
use memorability_learn::LearnError;
use thiserror::Error;

pub type Result<T, E = FeatureError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("empty input: {0}")]
    Empty(String),
    #[error("no stems present")]
    AllMissing,
    #[error("missing tag sidecar {0}")]
    MissingSidecar(PathBuf),
    #[error("invalid value: {0}")]
    Validation(String),
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("clip {clip_id}: {source}")]
    Clip {
        clip_id: String,
        source: Box<FeatureError>,
    },
}

impl FeatureError {
    pub fn kind(&self) -> &'static str {
        match self {
            FeatureError::Empty(_) => "empty",
            FeatureError::AllMissing => "all_missing",
            FeatureError::MissingSidecar(_) => "missing_sidecar",
            FeatureError::Validation(_) => "validation",
            FeatureError::Degenerate(_) => "degenerate",
            FeatureError::Io { .. } => "io",
            FeatureError::Dsp(e) => e.kind(),
            FeatureError::Learn(e) => e.kind(),
            FeatureError::Core(e) => e.kind(),
            FeatureError::Json(_) => "json",
            FeatureError::Csv(_) => "csv",
            FeatureError::Clip { source, .. } => source.kind(),
        }
    }
}

pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> FeatureError {
    FeatureError::Io {
        path: path.into(),
        source,
    }
}

impl FeatureError {
    pub fn for_clip(self, clip_id: &str) -> FeatureError {
        match self {
            e @ FeatureError::Clip { .. } => e,
            e => FeatureError::Clip {
                clip_id: clip_id.to_string(),
                source: Box::new(e),
            },
        }
    }
}
