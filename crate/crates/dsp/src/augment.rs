//! Training-time augmentations: pitch shift, frequency masking, band-stop
//! filtering and synthetic reverberation.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::audio::{rms, Waveform};
use crate::error::{DspError, Result};
use crate::spectrum::{StftPlan, DEFAULT_HOP, DEFAULT_WIN};
use crate::stretch::pitch_shift;

/// Second-order notch centred on `f0` (RBJ cookbook coefficients).
pub fn band_stop(w: &Waveform, f0: f64, q: f64) -> Result<Waveform> {
    let nyquist = w.sample_rate as f64 / 2.0;
    if !(f0 > 0.0 && f0 < nyquist) {
        return Err(DspError::Range(format!("notch at {f0} Hz, Nyquist {nyquist} Hz")));
    }
    if !(q > 0.0 && q.is_finite()) {
        return Err(DspError::Range(format!("notch Q {q}")));
    }
    let w0 = 2.0 * PI * f0 / w.sample_rate as f64;
    let alpha = w0.sin() / (2.0 * q);
    let a0 = 1.0 + alpha;
    let b = [1.0 / a0, -2.0 * w0.cos() / a0, 1.0 / a0];
    let a = [-2.0 * w0.cos() / a0, (1.0 - alpha) / a0];
    let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
    let out = w
        .samples
        .iter()
        .map(|&x| {
            let y = b[0] * x + b[1] * x1 + b[2] * x2 - a[0] * y1 - a[1] * y2;
            x2 = x1;
            x1 = x;
            y2 = y1;
            y1 = y;
            y
        })
        .collect();
    Ok(w.with_samples(out))
}

/// Zeroes STFT bins `lo_bin..hi_bin` and resynthesises the waveform.
pub fn freq_mask_waveform(w: &Waveform, lo_bin: usize, hi_bin: usize) -> Result<Waveform> {
    let n_bins = DEFAULT_WIN / 2 + 1;
    if lo_bin >= hi_bin || hi_bin > n_bins {
        return Err(DspError::Range(format!("mask band {lo_bin}..{hi_bin} outside 0..{n_bins}")));
    }
    let plan = StftPlan::new(DEFAULT_WIN, DEFAULT_HOP);
    // a full window of padding keeps the signal inside the fully overlapped region
    let pad = DEFAULT_WIN;
    let mut x = vec![0.0; pad];
    x.extend_from_slice(&w.samples);
    x.resize(x.len() + pad + DEFAULT_HOP, 0.0);
    let mut frames = plan.forward(&x);
    for f in &mut frames {
        f[lo_bin..hi_bin]
            .iter_mut()
            .for_each(|c| *c = Complex64::new(0.0, 0.0));
    }
    let mut y = plan.inverse(&frames, x.len());
    y.drain(..pad);
    y.truncate(w.len());
    Ok(w.with_samples(y))
}

/// Convolves with exponentially decaying white noise whose energy falls by
/// 60 dB after `rt60_s`, then restores the input RMS.
pub fn reverb(w: &Waveform, rt60_s: f64, seed: u64) -> Result<Waveform> {
    if !(rt60_s > 0.0 && rt60_s <= 3.0) {
        return Err(DspError::Range(format!("rt60 {rt60_s} s outside (0, 3]")));
    }
    let sr = w.sample_rate as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ir_len = ((1.5 * rt60_s * sr).ceil() as usize).max(1);
    let ir: Vec<f64> = (0..ir_len)
        .map(|i| rng.gen_range(-1.0..1.0) * 10f64.powf(-3.0 * (i as f64 / sr) / rt60_s))
        .collect();
    let n = w.len();
    if n == 0 {
        return Ok(w.clone());
    }
    let size = (n + ir_len - 1).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let spectrum = |v: &[f64]| {
        let mut buf: Vec<Complex64> = v.iter().map(|&s| Complex64::new(s, 0.0)).collect();
        buf.resize(size, Complex64::new(0.0, 0.0));
        fwd.process(&mut buf);
        buf
    };
    let a = spectrum(&w.samples);
    let b = spectrum(&ir);
    let mut prod: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
    inv.process(&mut prod);
    let mut y: Vec<f64> = prod[..n].iter().map(|c| c.re / size as f64).collect();
    let (level_in, level_out) = (w.rms(), rms(&y));
    if level_out > 0.0 {
        let g = level_in / level_out;
        y.iter_mut().for_each(|v| *v *= g);
    }
    Ok(w.with_samples(y))
}

/// One concrete augmentation with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Augmentation {
    PitchShift { semitones: i32 },
    FreqMask { lo_bin: usize, hi_bin: usize },
    BandStop { f0: f64, q: f64 },
    Reverb { rt60_s: f64, seed: u64 },
}

impl Augmentation {
    pub fn apply(&self, w: &Waveform) -> Result<Waveform> {
        match *self {
            Augmentation::PitchShift { semitones } => pitch_shift(w, semitones),
            Augmentation::FreqMask { lo_bin, hi_bin } => freq_mask_waveform(w, lo_bin, hi_bin),
            Augmentation::BandStop { f0, q } => band_stop(w, f0, q),
            Augmentation::Reverb { rt60_s, seed } => reverb(w, rt60_s, seed),
        }
    }

    /// One draw of each of the four kinds.
    pub fn draw_set<R: Rng>(rng: &mut R) -> [Augmentation; 4] {
        let mut semitones = 0;
        while semitones == 0 {
            semitones = rng.gen_range(-5..=5);
        }
        let n_bins = DEFAULT_WIN / 2 + 1;
        let width = rng.gen_range(20..=100);
        let lo_bin = rng.gen_range(0..n_bins - width);
        [
            Augmentation::PitchShift { semitones },
            Augmentation::FreqMask {
                lo_bin,
                hi_bin: lo_bin + width,
            },
            Augmentation::BandStop {
                f0: 10f64.powf(rng.gen_range(2f64..(4000f64).log10())),
                q: rng.gen_range(1.0..10.0),
            },
            Augmentation::Reverb {
                rt60_s: rng.gen_range(0.2..1.0),
                seed: rng.gen(),
            },
        ]
    }
}
