//! Short-time Fourier analysis and the spectral representations built on it.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::audio::Waveform;
use crate::error::{DspError, Result};

pub const DEFAULT_WIN: usize = 2048;
pub const DEFAULT_HOP: usize = 512;

/// Pitch-class labels, C first.
pub const PITCH_CLASSES: [&str; 12] = [
    "C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B",
];

/// What the columns of a [`Spectrogram`] mean.
#[derive(Debug, Clone, PartialEq)]
pub enum BinAxis {
    /// Linear-frequency bins, centre frequencies in Hz.
    Hz(Vec<f64>),
    /// Mel bands, centre frequencies in Hz.
    Mel(Vec<f64>),
    /// The twelve equal-tempered pitch classes, C first.
    PitchClass,
}

/// Non-negative frames × bins matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub magnitudes: Vec<Vec<f64>>,
    pub hop_s: f64,
    pub axis: BinAxis,
}

impl Spectrogram {
    pub fn n_frames(&self) -> usize {
        self.magnitudes.len()
    }

    pub fn n_bins(&self) -> usize {
        match &self.axis {
            BinAxis::Hz(f) | BinAxis::Mel(f) => f.len(),
            BinAxis::PitchClass => 12,
        }
    }

    /// CSV dump, one row per frame.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for frame in &self.magnitudes {
            let row: Vec<String> = frame.iter().map(|v| v.to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

pub(crate) struct StftPlan {
    pub win: usize,
    pub hop: usize,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl StftPlan {
    pub fn new(win: usize, hop: usize) -> Self {
        let mut planner = FftPlanner::new();
        StftPlan {
            win,
            hop,
            window: hann(win),
            fft: planner.plan_fft_forward(win),
            ifft: planner.plan_fft_inverse(win),
        }
    }

    pub fn n_frames(&self, n: usize) -> usize {
        if n < self.win {
            0
        } else {
            1 + (n - self.win) / self.hop
        }
    }

    /// Half spectra (bins 0..=win/2) of every full frame.
    pub fn forward(&self, x: &[f64]) -> Vec<Vec<Complex64>> {
        let half = self.win / 2 + 1;
        (0..self.n_frames(x.len()))
            .map(|f| {
                let start = f * self.hop;
                let mut buf: Vec<Complex64> = x[start..start + self.win]
                    .iter()
                    .zip(&self.window)
                    .map(|(s, w)| Complex64::new(s * w, 0.0))
                    .collect();
                self.fft.process(&mut buf);
                buf.truncate(half);
                buf
            })
            .collect()
    }

    /// Weighted overlap-add inverse with window-sum-square normalisation.
    pub fn inverse(&self, frames: &[Vec<Complex64>], out_len: usize) -> Vec<f64> {
        let n = self.win;
        let total = if frames.is_empty() {
            0
        } else {
            (frames.len() - 1) * self.hop + n
        };
        let mut out = vec![0.0; total.max(out_len)];
        let mut norm = vec![0.0; out.len()];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (f, half) in frames.iter().enumerate() {
            buf[..half.len()].copy_from_slice(half);
            for k in 1..n - half.len() + 1 {
                buf[n - k] = half[k].conj();
            }
            self.ifft.process(&mut buf);
            let start = f * self.hop;
            for i in 0..n {
                let w = self.window[i];
                out[start + i] += buf[i].re / n as f64 * w;
                norm[start + i] += w * w;
            }
        }
        for (o, w) in out.iter_mut().zip(&norm) {
            if *w > 1e-8 {
                *o /= w;
            }
        }
        out.truncate(out_len);
        out
    }
}

/// Magnitude STFT with a Hann window and no padding: `1 + (n − win) / hop`
/// frames of `win / 2 + 1` bins.
pub fn stft(w: &Waveform, win: usize, hop: usize) -> Result<Spectrogram> {
    if hop == 0 || win < hop || win < 2 {
        return Err(DspError::Range(format!("window {win} / hop {hop}")));
    }
    if w.len() < win {
        return Err(DspError::TooShort(format!(
            "{} samples for a {win}-sample window",
            w.len()
        )));
    }
    let plan = StftPlan::new(win, hop);
    let magnitudes = plan
        .forward(&w.samples)
        .into_iter()
        .map(|frame| frame.iter().map(|c| c.norm()).collect())
        .collect();
    let freqs = (0..=win / 2)
        .map(|k| k as f64 * w.sample_rate as f64 / win as f64)
        .collect();
    Ok(Spectrogram {
        magnitudes,
        hop_s: hop as f64 / w.sample_rate as f64,
        axis: BinAxis::Hz(freqs),
    })
}

/// Pitch class (C = 0) of the equal-tempered semitone nearest to `hz`,
/// with A4 = 440 Hz.
pub fn pitch_class(hz: f64) -> usize {
    let midi = 69.0 + 12.0 * (hz / 440.0).log2();
    (midi.round() as i64).rem_euclid(12) as usize
}

/// Folds each bin's energy onto the pitch class of its nearest semitone;
/// every non-silent frame is scaled to a maximum of 1.
pub fn chroma(spec: &Spectrogram) -> Result<Spectrogram> {
    let BinAxis::Hz(freqs) = &spec.axis else {
        return Err(DspError::Range("chroma needs a linear-frequency spectrogram".into()));
    };
    let classes: Vec<Option<usize>> = freqs
        .iter()
        .map(|&f| (f > 0.0).then(|| pitch_class(f)))
        .collect();
    let magnitudes = spec
        .magnitudes
        .iter()
        .map(|frame| {
            let mut c = vec![0.0; 12];
            for (m, class) in frame.iter().zip(&classes) {
                if let Some(k) = class {
                    c[*k] += m * m;
                }
            }
            let max = c.iter().copied().fold(0.0, f64::max);
            if max > 0.0 {
                c.iter_mut().for_each(|v| *v /= max);
            }
            c
        })
        .collect();
    Ok(Spectrogram {
        magnitudes,
        hop_s: spec.hop_s,
        axis: BinAxis::PitchClass,
    })
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular mel filterbank applied to power, 0 Hz to the top bin.
pub fn mel(spec: &Spectrogram, n_mels: usize) -> Result<Spectrogram> {
    let BinAxis::Hz(freqs) = &spec.axis else {
        return Err(DspError::Range("mel needs a linear-frequency spectrogram".into()));
    };
    if n_mels == 0 {
        return Err(DspError::Range("n_mels must be positive".into()));
    }
    let top = *freqs.last().unwrap_or(&0.0);
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(hz_to_mel(top) * i as f64 / (n_mels + 1) as f64))
        .collect();
    let weights: Vec<Vec<f64>> = (0..n_mels)
        .map(|m| {
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            freqs
                .iter()
                .map(|&f| {
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= mid {
                        (f - lo) / (mid - lo)
                    } else {
                        (hi - f) / (hi - mid)
                    }
                })
                .collect()
        })
        .collect();
    let magnitudes = spec
        .magnitudes
        .iter()
        .map(|frame| {
            weights
                .iter()
                .map(|w| w.iter().zip(frame).map(|(a, m)| a * m * m).sum())
                .collect()
        })
        .collect();
    Ok(Spectrogram {
        magnitudes,
        hop_s: spec.hop_s,
        axis: BinAxis::Mel(edges[1..=n_mels].to_vec()),
    })
}

/// Zeroes the bins `lo_bin..hi_bin` (half-open) in every frame.
pub fn freq_mask(spec: &Spectrogram, lo_bin: usize, hi_bin: usize) -> Result<Spectrogram> {
    if lo_bin >= hi_bin || hi_bin > spec.n_bins() {
        return Err(DspError::Range(format!(
            "mask band {lo_bin}..{hi_bin} outside 0..{}",
            spec.n_bins()
        )));
    }
    let mut out = spec.clone();
    for frame in &mut out.magnitudes {
        frame[lo_bin..hi_bin].iter_mut().for_each(|v| *v = 0.0);
    }
    Ok(out)
}

/// Frequency of the strongest spectral peak over the whole signal, refined
/// by parabolic interpolation of the log magnitude.
pub fn dominant_frequency(w: &Waveform) -> f64 {
    let n = w.len().max(2);
    let padded = (n * 4).next_power_of_two();
    let window = hann(n);
    let mut buf: Vec<Complex64> = w
        .samples
        .iter()
        .zip(&window)
        .map(|(s, h)| Complex64::new(s * h, 0.0))
        .collect();
    buf.resize(padded, Complex64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(padded).process(&mut buf);
    let mags: Vec<f64> = buf[..padded / 2].iter().map(|c| c.norm()).collect();
    let k = mags
        .iter()
        .enumerate()
        .skip(1)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map_or(0, |(i, _)| i);
    let mut pos = k as f64;
    if k > 0 && k + 1 < mags.len() {
        let (a, b, c) = (
            mags[k - 1].max(1e-300).ln(),
            mags[k].max(1e-300).ln(),
            mags[k + 1].max(1e-300).ln(),
        );
        let denom = a - 2.0 * b + c;
        if denom.abs() > 1e-15 {
            pos += 0.5 * (a - c) / denom;
        }
    }
    pos * w.sample_rate as f64 / padded as f64
}
