//! Phase-vocoder time stretching and the pitch shift built on it.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::audio::{sinc_interpolate, Waveform};
use crate::error::{DspError, Result};
use crate::spectrum::{StftPlan, DEFAULT_HOP, DEFAULT_WIN};

pub const CLIP_SECONDS: f64 = 5.0;
const MIN_RATIO: f64 = 0.2;
const MAX_RATIO: f64 = 5.0;

fn wrap(p: f64) -> f64 {
    p - 2.0 * PI * ((p + PI) / (2.0 * PI)).floor()
}

/// Plays `x` at speed `rate` (> 1 shortens) without changing pitch and
/// returns exactly `out_len` samples.
fn vocode(x: &[f64], rate: f64, out_len: usize) -> Vec<f64> {
    let plan = StftPlan::new(DEFAULT_WIN, DEFAULT_HOP);
    let pad = DEFAULT_WIN / 2;
    let mut padded = vec![0.0; pad];
    padded.extend_from_slice(x);
    padded.resize(padded.len() + pad, 0.0);
    // make the last frame reach the end of the signal
    let tail = (padded.len() - DEFAULT_WIN) % DEFAULT_HOP;
    if tail != 0 {
        padded.resize(padded.len() + DEFAULT_HOP - tail, 0.0);
    }
    let mut frames = plan.forward(&padded);
    let n_bins = DEFAULT_WIN / 2 + 1;
    let n_frames = frames.len();
    frames.push(vec![Complex64::new(0.0, 0.0); n_bins]);

    let advance: Vec<f64> = (0..n_bins)
        .map(|k| 2.0 * PI * DEFAULT_HOP as f64 * k as f64 / DEFAULT_WIN as f64)
        .collect();
    let mut phase: Vec<f64> = frames[0].iter().map(|c| c.arg()).collect();
    let mut out_frames = Vec::new();
    let mut step = 0.0f64;
    while step < n_frames as f64 {
        let t = step.floor() as usize;
        let alpha = step - t as f64;
        let (c0, c1) = (&frames[t], &frames[t + 1]);
        let mut frame = Vec::with_capacity(n_bins);
        for k in 0..n_bins {
            let mag = (1.0 - alpha) * c0[k].norm() + alpha * c1[k].norm();
            frame.push(Complex64::from_polar(mag, phase[k]));
            let dphi = wrap(c1[k].arg() - c0[k].arg() - advance[k]);
            phase[k] += advance[k] + dphi;
        }
        out_frames.push(frame);
        step += rate;
    }
    let full = (out_frames.len() - 1) * DEFAULT_HOP + DEFAULT_WIN;
    let mut y = plan.inverse(&out_frames, full);
    y.drain(..pad.min(y.len()));
    y.resize(out_len, 0.0);
    y
}

/// Changes the duration to `target_s` while keeping the pitch. The output
/// has exactly `round(target_s * sample_rate)` samples.
pub fn time_stretch(w: &Waveform, target_s: f64) -> Result<Waveform> {
    if !(target_s > 0.0) || w.is_empty() {
        return Err(DspError::Ratio(f64::NAN));
    }
    let out_len = (target_s * w.sample_rate as f64).round() as usize;
    if out_len == w.len() {
        return Ok(w.clone());
    }
    let ratio = w.duration_s() / target_s;
    if !(MIN_RATIO..=MAX_RATIO).contains(&ratio) {
        return Err(DspError::Ratio(ratio));
    }
    Ok(w.with_samples(vocode(&w.samples, ratio, out_len)))
}

/// Transposes by `semitones` while keeping the length.
pub fn pitch_shift(w: &Waveform, semitones: i32) -> Result<Waveform> {
    if semitones.abs() > 12 {
        return Err(DspError::Range(format!("pitch shift of {semitones} semitones")));
    }
    if semitones == 0 {
        return Ok(w.clone());
    }
    let factor = 2f64.powf(semitones as f64 / 12.0);
    let long_len = (w.len() as f64 * factor).round() as usize;
    let stretched = vocode(&w.samples, 1.0 / factor, long_len);
    Ok(w.with_samples(sinc_interpolate(&stretched, factor, w.len())))
}
