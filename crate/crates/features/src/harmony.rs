//! Pitch-class profile statistics.

use memorability_dsp::{BinAxis, Spectrogram};

use crate::error::{FeatureError, Result};

/// Per-class mean (first 12) and population standard deviation (last 12)
/// across chroma frames.
pub fn extract_harmony(chroma: &Spectrogram) -> Result<[f64; 24]> {
    if chroma.axis != BinAxis::PitchClass {
        return Err(FeatureError::Validation("harmony needs a 12-class chroma".into()));
    }
    let frames = &chroma.magnitudes;
    if frames.is_empty() {
        return Err(FeatureError::Empty("chroma has no frames".into()));
    }
    let n = frames.len() as f64;
    let mut out = [0.0; 24];
    for c in 0..12 {
        let mean = frames.iter().map(|f| f[c]).sum::<f64>() / n;
        let var = frames.iter().map(|f| (f[c] - mean).powi(2)).sum::<f64>() / n;
        out[c] = mean;
        out[12 + c] = var.sqrt();
    }
    Ok(out)
}
