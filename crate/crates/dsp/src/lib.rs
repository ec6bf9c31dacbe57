//! Audio I/O and signal processing for clip analysis and augmentation.

pub mod audio;
pub mod augment;
pub mod error;
pub mod rhythm;
pub mod spectrum;
pub mod stretch;
pub mod synth;

pub use audio::{load_audio, normalize_loudness, resample, Waveform, ANALYSIS_RATE};
pub use augment::{band_stop, freq_mask_waveform, reverb, Augmentation};
pub use error::{DspError, Result};
pub use rhythm::{tempo_estimate, zero_crossings, ZeroCrossings};
pub use spectrum::{chroma, freq_mask, mel, stft, BinAxis, Spectrogram};
pub use stretch::{pitch_shift, time_stretch, CLIP_SECONDS};
