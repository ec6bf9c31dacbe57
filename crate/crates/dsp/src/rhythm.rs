//! Zero-crossing statistics and tempo estimation.

use crate::audio::Waveform;
use crate::error::{DspError, Result};
use crate::spectrum::{StftPlan, DEFAULT_HOP, DEFAULT_WIN};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroCrossings {
    pub count: usize,
    pub mean_rate: f64,
    pub median_rate: f64,
}

fn changes(x: &[f64]) -> usize {
    x.windows(2).filter(|p| (p[0] >= 0.0) != (p[1] >= 0.0)).count()
}

/// Sign changes over the whole signal plus per-frame rates (changes divided
/// by the frame length). Signals shorter than one frame form a single frame.
pub fn zero_crossings(w: &Waveform) -> Result<ZeroCrossings> {
    if w.is_empty() {
        return Err(DspError::TooShort("empty signal".into()));
    }
    let x = &w.samples;
    let count = changes(x);
    let mut rates: Vec<f64> = if x.len() < DEFAULT_WIN {
        vec![changes(x) as f64 / x.len() as f64]
    } else {
        (0..=(x.len() - DEFAULT_WIN) / DEFAULT_HOP)
            .map(|f| {
                let s = f * DEFAULT_HOP;
                changes(&x[s..s + DEFAULT_WIN]) as f64 / DEFAULT_WIN as f64
            })
            .collect()
    };
    let mean_rate = rates.iter().sum::<f64>() / rates.len() as f64;
    rates.sort_by(f64::total_cmp);
    let m = rates.len();
    let median_rate = if m % 2 == 1 {
        rates[m / 2]
    } else {
        0.5 * (rates[m / 2 - 1] + rates[m / 2])
    };
    Ok(ZeroCrossings {
        count,
        mean_rate,
        median_rate,
    })
}

pub const MIN_BPM: f64 = 40.0;
pub const MAX_BPM: f64 = 220.0;
const FOLD_LO: f64 = 70.0;
const FOLD_HI: f64 = 180.0;
const FOLD_SUPPORT: f64 = 0.8;
const COARSE_TEETH: usize = 4;
const REFINE_SPAN: f64 = 0.04;
const MIN_ONSET_FLUX: f64 = 0.01;

/// Half-wave rectified spectral flux of log-compressed magnitudes.
fn onset_envelope(w: &Waveform) -> Vec<f64> {
    let plan = StftPlan::new(DEFAULT_WIN, DEFAULT_HOP);
    let frames: Vec<Vec<f64>> = plan
        .forward(&w.samples)
        .into_iter()
        .map(|f| f.iter().map(|c| (1.0 + 100.0 * c.norm()).ln()).collect())
        .collect();
    frames
        .windows(2)
        .map(|p| {
            p[1].iter()
                .zip(&p[0])
                .map(|(b, a)| (b - a).max(0.0))
                .sum()
        })
        .collect()
}

fn autocorrelation(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|lag| x[..n - lag].iter().zip(&x[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64)
        .collect()
}

fn at(r: &[f64], lag: f64) -> f64 {
    let i = lag.floor() as usize;
    if i + 1 >= r.len() {
        return 0.0;
    }
    let a = lag - i as f64;
    (1.0 - a) * r[i] + a * r[i + 1]
}

/// Comb score of a beat period in frames: mean smoothed autocorrelation at
/// up to `max_teeth` multiples that fit in the envelope.
fn comb(r: &[f64], period: f64, max_teeth: usize) -> f64 {
    let max_lag = (r.len() - 2) as f64;
    let teeth = ((max_lag / period).floor() as usize).min(max_teeth);
    if teeth == 0 {
        return f64::NEG_INFINITY;
    }
    (1..=teeth).map(|k| at(r, k as f64 * period)).sum::<f64>() / teeth as f64
}

/// Tempo in BPM within [40, 220]. The octave is chosen on the first few
/// autocorrelation multiples, where the decaying autocorrelation favours
/// the fastest consistent pulse, and folded toward [70, 180] when the
/// doubled or halved tempo is nearly as well supported. The estimate is then
/// refined against every multiple that fits, which averages out onset jitter.
pub fn tempo_estimate(w: &Waveform) -> Result<f64> {
    if w.duration_s() < 2.0 {
        return Err(DspError::TooShort(format!(
            "{:.2} s for tempo estimation",
            w.duration_s()
        )));
    }
    let mut env = onset_envelope(w);
    // an onset must lift the log spectrum by more than 0.01 per bin on average
    let floor = MIN_ONSET_FLUX * (DEFAULT_WIN / 2 + 1) as f64;
    if env.len() < 4 || env.iter().all(|&v| v < floor) {
        return Err(DspError::NoOnsets);
    }
    let mean = env.iter().sum::<f64>() / env.len() as f64;
    env.iter_mut().for_each(|v| *v -= mean);
    let raw = autocorrelation(&env);
    let r: Vec<f64> = (0..raw.len())
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(raw.len() - 1);
            raw[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    let frame_s = DEFAULT_HOP as f64 / w.sample_rate as f64;
    let score = |bpm: f64| comb(&r, 60.0 / (bpm * frame_s), COARSE_TEETH);
    let fine = |bpm: f64| comb(&r, 60.0 / (bpm * frame_s), usize::MAX);
    let argmax = |lo: f64, hi: f64, f: &dyn Fn(f64) -> f64| {
        let steps = ((hi - lo) * 10.0).round() as usize;
        (0..=steps)
            .map(|i| lo + i as f64 * 0.1)
            .map(|bpm| (bpm, f(bpm)))
            .fold((lo, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b })
    };

    let (mut bpm, s) = argmax(MIN_BPM, MAX_BPM, &score);
    if s <= 0.0 {
        return Err(DspError::NoOnsets);
    }
    if bpm < FOLD_LO && bpm * 2.0 <= MAX_BPM && score(bpm * 2.0) >= FOLD_SUPPORT * s {
        bpm *= 2.0;
    } else if bpm > FOLD_HI && bpm / 2.0 >= MIN_BPM && score(bpm / 2.0) >= FOLD_SUPPORT * s {
        bpm /= 2.0;
    }
    let lo = (bpm * (1.0 - REFINE_SPAN)).max(MIN_BPM);
    let hi = (bpm * (1.0 + REFINE_SPAN)).min(MAX_BPM);
    Ok(argmax(lo, hi, &fine).0)
}
