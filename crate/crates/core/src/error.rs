use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T, E = CoreError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("response position {got} does not follow last position {last}")]
    Order { last: usize, got: usize },
    #[error("schedule infeasible: cannot place clip {clip_id:?} ({reason})")]
    Infeasible { clip_id: String, reason: String },
    #[error("clip {0:?} is not presented twice")]
    NotRepeated(String),
    #[error("position {position} out of range for schedule of length {len}")]
    Index { position: usize, len: usize },
    #[error("session {session_id:?} has no response at position(s) {missing:?}")]
    Incomplete {
        session_id: String,
        missing: Vec<usize>,
    },
    #[error("no scorable clips")]
    NoData,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("singular design matrix")]
    Singular,
    #[error("tables share only {0} clip(s), need at least 2")]
    InsufficientOverlap(usize),
}

impl CoreError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CoreError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Short stable identifier, used for machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            CoreError::Parse(_) => "parse",
            CoreError::Validation(_) => "validation",
            CoreError::Io { .. } => "io",
            CoreError::Order { .. } => "order",
            CoreError::Infeasible { .. } => "infeasible",
            CoreError::NotRepeated(_) => "not_repeated",
            CoreError::Index { .. } => "index",
            CoreError::Incomplete { .. } => "incomplete",
            CoreError::NoData => "no_data",
            CoreError::LengthMismatch(..) => "length_mismatch",
            CoreError::Degenerate(_) => "degenerate",
            CoreError::InsufficientData(_) => "insufficient_data",
            CoreError::Singular => "singular",
            CoreError::InsufficientOverlap(_) => "insufficient_overlap",
        }
    }
}
