//! Per-clip preprocessing and feature extraction.

use std::path::{Path, PathBuf};

use memorability_core::AudioClip;
use memorability_dsp::{
    chroma, load_audio, normalize_loudness, resample, stft, tempo_estimate, time_stretch, zero_crossings,
    Augmentation, Waveform, ANALYSIS_RATE, CLIP_SECONDS,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FeatureError, Result};
use crate::harmony::extract_harmony;
use crate::mood::MoodModel;
use crate::names::{with_mood, N_BASE, N_FEATURES};
use crate::tags::{load_genre_tags, sidecar_path, GenreTags};
use crate::timbre::{extract_timbre, load_stems, StemSet};

pub const TARGET_DBFS: f64 = -20.0;
/// Chroma needs finer frequency resolution than the shared 2048 grid gives
/// at low pitches.
pub const CHROMA_WIN: usize = 8192;
pub const CHROMA_HOP: usize = 512;

/// Resample to the analysis rate, stretch to the canonical clip length and
/// normalize loudness. Returns the gain applied by normalization.
/// Normalizing last keeps the level exact, since a phase vocoder does not
/// preserve RMS precisely.
pub fn preprocess(w: &Waveform) -> Result<(Waveform, f64)> {
    let r = time_stretch(&resample(w, ANALYSIS_RATE)?, CLIP_SECONDS)?;
    let level = r.rms();
    let n = normalize_loudness(&r, TARGET_DBFS)?;
    Ok((n, 10f64.powf(TARGET_DBFS / 20.0) / level))
}

/// Stems follow the mix's loudness gain but are not stretched: frame-level
/// dB statistics do not depend on duration.
pub fn prepare_stems(stems: &StemSet, gain: f64) -> Result<StemSet> {
    stems.map(|w| {
        let r = resample(w, ANALYSIS_RATE)?;
        Ok(Waveform::new(r.samples.iter().map(|s| s * gain).collect(), ANALYSIS_RATE)?)
    })
}

/// Where the externally produced inputs live.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SourceDirs {
    /// `<stems>/<clip_id>/{vocals,bass,drums,other}.wav`
    pub stems: Option<PathBuf>,
    /// `<tags>/<clip_id>.tags.json`
    pub tags: Option<PathBuf>,
    pub allow_default_tags: bool,
}

/// Everything one clip contributes, preprocessed.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipInput {
    pub clip_id: String,
    pub audio: Waveform,
    pub stems: StemSet,
    pub tags: GenreTags,
}

impl ClipInput {
    /// Preprocesses raw audio and stems.
    pub fn prepare(clip_id: &str, raw: &Waveform, stems: &StemSet, tags: GenreTags) -> Result<Self> {
        let (audio, gain) = preprocess(raw)?;
        Ok(ClipInput {
            clip_id: clip_id.to_string(),
            audio,
            stems: prepare_stems(stems, gain)?,
            tags,
        })
    }

    pub fn load(clip: &AudioClip, base_dir: &Path, dirs: &SourceDirs) -> Result<Self> {
        let audio_path = if clip.audio_path.is_absolute() {
            clip.audio_path.clone()
        } else {
            base_dir.join(&clip.audio_path)
        };
        let raw = load_audio(&audio_path)?;
        let stems = match &dirs.stems {
            Some(d) => load_stems(&d.join(&clip.id))?,
            None => StemSet::default(),
        };
        let tags = match &dirs.tags {
            Some(d) => load_genre_tags(&sidecar_path(d, &clip.id), dirs.allow_default_tags)?,
            None if dirs.allow_default_tags => GenreTags::DEFAULT,
            None => return Err(FeatureError::MissingSidecar(sidecar_path(Path::new("."), &clip.id))),
        };
        ClipInput::prepare(&clip.id, &raw, &stems, tags)
    }
}

/// Loads and preprocesses every clip in parallel, in input order.
pub fn load_inputs(clips: &[AudioClip], base_dir: &Path, dirs: &SourceDirs) -> Result<Vec<ClipInput>> {
    clips
        .par_iter()
        .map(|c| ClipInput::load(c, base_dir, dirs).map_err(|e| e.for_clip(&c.id)))
        .collect()
}

/// Where a value came from when it was not measured.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub missing_stems: Vec<String>,
    pub default_tags: bool,
}

/// The 38 dimensions that do not need the mood model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseFeatures {
    pub values: Vec<f64>,
    pub provenance: Provenance,
}

/// The full 40-dimensional vector in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EhcFeatureVector {
    pub values: Vec<f64>,
    pub provenance: Provenance,
}

impl EhcFeatureVector {
    pub fn names() -> Vec<String> {
        crate::names::feature_names()
    }
}

/// Harmony (24), bpm and zero-crossing statistics (3) of the mix.
fn signal_features(w: &Waveform) -> Result<([f64; 24], f64, [f64; 3])> {
    let harmony = extract_harmony(&chroma(&stft(w, CHROMA_WIN, CHROMA_HOP)?)?)?;
    let bpm = tempo_estimate(w)?;
    let zc = zero_crossings(w)?;
    Ok((harmony, bpm, [zc.count as f64, zc.mean_rate, zc.median_rate]))
}

fn base_from_parts(harmony: &[f64; 24], bpm: f64, timbre: &[f64; 8], zc: &[f64; 3], tags: &GenreTags) -> Vec<f64> {
    let mut v = Vec::with_capacity(N_BASE);
    v.extend_from_slice(harmony);
    v.push(bpm);
    v.extend_from_slice(timbre);
    v.extend_from_slice(zc);
    v.push(tags.music);
    v.push(tags.musical_instrument);
    v
}

fn check_finite(v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(FeatureError::Validation(format!("feature {i} is not finite"))),
        None => Ok(()),
    }
}

pub fn extract_base_features(input: &ClipInput) -> Result<BaseFeatures> {
    let (harmony, bpm, zc) = signal_features(&input.audio)?;
    let timbre = extract_timbre(&input.stems)?;
    let values = base_from_parts(&harmony, bpm, &timbre.values, &zc, &input.tags);
    check_finite(&values)?;
    Ok(BaseFeatures {
        values,
        provenance: Provenance {
            missing_stems: timbre.missing.iter().map(|s| s.to_string()).collect(),
            default_tags: input.tags.defaulted,
        },
    })
}

/// Adds the predicted mood to a base vector.
pub fn complete_features(base: &BaseFeatures, mood: &MoodModel) -> Result<EhcFeatureVector> {
    if base.values.len() != N_BASE {
        return Err(FeatureError::Validation(format!(
            "base vector of width {}, expected {N_BASE}",
            base.values.len()
        )));
    }
    let (v, a) = mood.predict(&base.values)?;
    let values = with_mood(&base.values, v, a);
    debug_assert_eq!(values.len(), N_FEATURES);
    Ok(EhcFeatureVector {
        values,
        provenance: base.provenance.clone(),
    })
}

pub fn assemble_features(input: &ClipInput, mood: &MoodModel) -> Result<EhcFeatureVector> {
    complete_features(&extract_base_features(input)?, mood)
}

/// Clips are independent, so they are processed in parallel. Output order
/// follows input order.
pub fn extract_batch(inputs: &[ClipInput], mood: Option<&MoodModel>) -> Vec<Result<Vec<f64>>> {
    inputs
        .par_iter()
        .map(|c| {
            let run = || {
                let base = extract_base_features(c)?;
                match mood {
                    Some(m) => Ok(complete_features(&base, m)?.values),
                    None => Ok(base.values),
                }
            };
            run().map_err(|e: FeatureError| e.for_clip(&c.clip_id))
        })
        .collect()
}

/// Stable per-clip seed so a clip's augmentations do not depend on the
/// order clips are processed in.
pub fn clip_seed(seed: u64, clip_id: &str) -> u64 {
    // FNV-1a
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed;
    for b in clip_id.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedRow {
    pub clip_id: String,
    pub augmentation: Augmentation,
    pub values: Vec<f64>,
}

/// One augmented feature row per augmentation kind. The mix is transformed
/// and its harmony, tempo, zero-crossing and mood dimensions recomputed;
/// stems and tags are external inputs and stay as measured.
pub fn augment_clip(input: &ClipInput, mood: Option<&MoodModel>, seed: u64) -> Result<Vec<AugmentedRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(clip_seed(seed, &input.clip_id));
    let timbre = extract_timbre(&input.stems)?;
    Augmentation::draw_set(&mut rng)
        .into_iter()
        .map(|aug| {
            let w = aug.apply(&input.audio)?;
            let (harmony, bpm, zc) = signal_features(&w)?;
            let base = base_from_parts(&harmony, bpm, &timbre.values, &zc, &input.tags);
            check_finite(&base)?;
            let values = match mood {
                Some(m) => {
                    let (v, a) = m.predict(&base)?;
                    with_mood(&base, v, a)
                }
                None => base,
            };
            Ok(AugmentedRow {
                clip_id: input.clip_id.clone(),
                augmentation: aug,
                values,
            })
        })
        .collect()
}

pub fn augment_batch(inputs: &[ClipInput], mood: Option<&MoodModel>, seed: u64) -> Vec<Result<Vec<AugmentedRow>>> {
    inputs
        .par_iter()
        .map(|c| augment_clip(c, mood, seed).map_err(|e| e.for_clip(&c.clip_id)))
        .collect()
}
