//! Loudness statistics of separated stems.

use std::path::Path;

use memorability_dsp::spectrum::{DEFAULT_HOP, DEFAULT_WIN};
use memorability_dsp::{load_audio, resample, Waveform, ANALYSIS_RATE};

use crate::error::{FeatureError, Result};
use crate::names::STEMS;

pub const DB_FLOOR: f64 = -80.0;

/// Separated sources; any of them may be absent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StemSet {
    pub vocals: Option<Waveform>,
    pub bass: Option<Waveform>,
    pub drums: Option<Waveform>,
    pub other: Option<Waveform>,
}

impl StemSet {
    /// In canonical order: vocals, bass, drums, other.
    pub fn as_array(&self) -> [Option<&Waveform>; 4] {
        [self.vocals.as_ref(), self.bass.as_ref(), self.drums.as_ref(), self.other.as_ref()]
    }

    fn slots_mut(&mut self) -> [&mut Option<Waveform>; 4] {
        [&mut self.vocals, &mut self.bass, &mut self.drums, &mut self.other]
    }

    pub fn present(&self) -> usize {
        self.as_array().iter().flatten().count()
    }

    /// Present stems must share a sample rate and agree in length to
    /// within one hop.
    pub fn validate(&self) -> Result<()> {
        let present: Vec<&Waveform> = self.as_array().into_iter().flatten().collect();
        if let Some(first) = present.first() {
            for w in &present[1..] {
                if w.sample_rate != first.sample_rate {
                    return Err(FeatureError::Validation(format!(
                        "stem rates differ: {} vs {}",
                        w.sample_rate, first.sample_rate
                    )));
                }
                if w.len().abs_diff(first.len()) > DEFAULT_HOP {
                    return Err(FeatureError::Validation(format!(
                        "stem lengths differ: {} vs {}",
                        w.len(),
                        first.len()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(&Waveform) -> Result<Waveform>) -> Result<StemSet> {
        let mut out = StemSet::default();
        for (slot, stem) in out.slots_mut().into_iter().zip(self.as_array()) {
            if let Some(w) = stem {
                *slot = Some(f(w)?);
            }
        }
        Ok(out)
    }
}

/// Reads `<dir>/{vocals,bass,drums,other}.wav`, skipping absent files, and
/// brings each stem to the analysis rate.
pub fn load_stems(dir: &Path) -> Result<StemSet> {
    let mut set = StemSet::default();
    for (slot, name) in set.slots_mut().into_iter().zip(STEMS) {
        let p = dir.join(format!("{name}.wav"));
        if p.is_file() {
            *slot = Some(resample(&load_audio(&p)?, ANALYSIS_RATE)?);
        }
    }
    Ok(set)
}

/// Frame RMS levels in dB, floored at −80.
pub fn frame_db(w: &Waveform) -> Vec<f64> {
    let x = &w.samples;
    let frames: Vec<&[f64]> = if x.len() < DEFAULT_WIN {
        vec![&x[..]]
    } else {
        (0..=(x.len() - DEFAULT_WIN) / DEFAULT_HOP)
            .map(|f| &x[f * DEFAULT_HOP..f * DEFAULT_HOP + DEFAULT_WIN])
            .collect()
    };
    frames
        .into_iter()
        .map(|f| {
            let rms = memorability_dsp::audio::rms(f);
            if rms > 0.0 {
                (20.0 * rms.log10()).max(DB_FLOOR)
            } else {
                DB_FLOOR
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Timbre {
    /// Four dB means then four dB standard deviations.
    pub values: [f64; 8],
    pub missing: Vec<&'static str>,
}

pub fn extract_timbre(stems: &StemSet) -> Result<Timbre> {
    if stems.present() == 0 {
        return Err(FeatureError::AllMissing);
    }
    stems.validate()?;
    let mut values = [0.0; 8];
    let mut missing = Vec::new();
    for (i, (stem, name)) in stems.as_array().into_iter().zip(STEMS).enumerate() {
        match stem {
            Some(w) if !w.is_empty() => {
                let db = frame_db(w);
                let n = db.len() as f64;
                let mean = db.iter().sum::<f64>() / n;
                values[i] = mean;
                values[4 + i] = (db.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n).sqrt();
            }
            _ => {
                values[i] = DB_FLOOR;
                values[4 + i] = 0.0;
                missing.push(name);
            }
        }
    }
    Ok(Timbre { values, missing })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(a: f64, n: usize) -> Waveform {
        Waveform::new(vec![a; n], ANALYSIS_RATE).unwrap()
    }

    #[test]
    fn constant_amplitude_is_minus_20() {
        let s = StemSet {
            vocals: Some(constant(0.1, 22050)),
            ..Default::default()
        };
        let t = extract_timbre(&s).unwrap();
        assert!((t.values[0] + 20.0).abs() < 1e-9);
        assert!(t.values[4].abs() < 1e-9);
        assert_eq!(t.missing, vec!["bass", "drums", "other"]);
        assert_eq!(t.values[1], -80.0);
        assert_eq!(t.values[5], 0.0);
    }

    #[test]
    fn silence_hits_floor() {
        let s = StemSet {
            other: Some(constant(0.0, 5000)),
            ..Default::default()
        };
        let t = extract_timbre(&s).unwrap();
        assert_eq!(t.values[3], -80.0);
        assert_eq!(t.values[7], 0.0);
    }

    #[test]
    fn nothing_present() {
        assert!(matches!(extract_timbre(&StemSet::default()), Err(FeatureError::AllMissing)));
    }

    #[test]
    fn mismatched_lengths() {
        let s = StemSet {
            vocals: Some(constant(0.1, 22050)),
            bass: Some(constant(0.1, 20000)),
            ..Default::default()
        };
        assert!(matches!(extract_timbre(&s), Err(FeatureError::Validation(_))));
    }
}
