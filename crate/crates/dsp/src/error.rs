use thiserror::Error;

pub type Result<T, E = DspError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("unsupported or malformed audio: {0}")]
    Format(String),
    #[error("audio contains non-finite samples")]
    NonFinite,
    #[error("signal is silent")]
    Silence,
    #[error("stretch ratio {0} outside [0.2, 5]")]
    Ratio(f64),
    #[error("signal too short: {0}")]
    TooShort(String),
    #[error("no onsets found in signal")]
    NoOnsets,
    #[error("parameter out of range: {0}")]
    Range(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl DspError {
    pub fn kind(&self) -> &'static str {
        match self {
            DspError::Format(_) => "format",
            DspError::NonFinite => "non_finite",
            DspError::Silence => "silence",
            DspError::Ratio(_) => "ratio",
            DspError::TooShort(_) => "too_short",
            DspError::NoOnsets => "no_onsets",
            DspError::Range(_) => "range",
            DspError::Io(_) => "io",
        }
    }
}
