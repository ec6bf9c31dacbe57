//! Waveforms, WAV I/O, loudness and band-limited resampling.

use std::f64::consts::PI;
use std::path::Path;

use crate::error::{DspError, Result};

/// Analysis rate every clip is brought to before feature extraction.
pub const ANALYSIS_RATE: u32 = 22_050;

/// Mono signal with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(DspError::Format("sample rate must be positive".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(DspError::NonFinite);
        }
        Ok(Waveform {
            samples,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn rms(&self) -> f64 {
        rms(&self.samples)
    }

    /// RMS level in dB relative to full scale (−inf for silence).
    pub fn rms_dbfs(&self) -> f64 {
        20.0 * self.rms().log10()
    }

    pub(crate) fn with_samples(&self, samples: Vec<f64>) -> Waveform {
        Waveform {
            samples,
            sample_rate: self.sample_rate,
        }
    }
}

pub fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// Reads a PCM WAV file (integer or float samples), averaging channels.
pub fn load_audio(path: &Path) -> Result<Waveform> {
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => DspError::Io(io),
        other => DspError::Format(format!("{}: {other}", path.display())),
    })?;
    decode(reader)
}

/// Same as [`load_audio`] for an in-memory WAV file.
pub fn decode_wav(bytes: &[u8]) -> Result<Waveform> {
    let reader = hound::WavReader::new(std::io::Cursor::new(bytes))
        .map_err(|e| DspError::Format(e.to_string()))?;
    decode(reader)
}

fn decode<R: std::io::Read>(mut reader: hound::WavReader<R>) -> Result<Waveform> {
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(DspError::Format("zero channels".into()));
    }
    let fmt_err = |e: hound::Error| DspError::Format(e.to_string());
    let interleaved: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Float => {
            if spec.bits_per_sample != 32 {
                return Err(DspError::Format(format!(
                    "{}-bit float samples not supported",
                    spec.bits_per_sample
                )));
            }
            reader
                .samples::<f32>()
                .map(|s| s.map(f64::from))
                .collect::<std::result::Result<_, _>>()
                .map_err(fmt_err)?
        }
        hound::SampleFormat::Int => {
            let scale = 2f64.powi(spec.bits_per_sample as i32 - 1);
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(fmt_err)?
        }
    };
    let samples = interleaved
        .chunks(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect();
    Waveform::new(samples, spec.sample_rate)
}

/// Writes a mono 32-bit float WAV.
pub fn write_wav(path: &Path, w: &Waveform) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: w.sample_rate,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| match e {
        hound::Error::IoError(io) => DspError::Io(io),
        other => DspError::Format(other.to_string()),
    })?;
    for &s in &w.samples {
        writer
            .write_sample(s as f32)
            .map_err(|e| DspError::Format(e.to_string()))?;
    }
    writer
        .finalize()
        .map_err(|e| DspError::Format(e.to_string()))
}

/// Writes a mono 16-bit integer WAV (samples clipped to [−1, 1]).
pub fn write_wav_i16(path: &Path, w: &Waveform) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: w.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer =
        hound::WavWriter::create(path, spec).map_err(|e| DspError::Format(e.to_string()))?;
    for &s in &w.samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        writer
            .write_sample(v)
            .map_err(|e| DspError::Format(e.to_string()))?;
    }
    writer
        .finalize()
        .map_err(|e| DspError::Format(e.to_string()))
}

/// Scales the signal so its RMS level equals `target_dbfs`.
pub fn normalize_loudness(w: &Waveform, target_dbfs: f64) -> Result<Waveform> {
    let level = w.rms();
    if level < 1e-10 {
        return Err(DspError::Silence);
    }
    let gain = 10f64.powf(target_dbfs / 20.0) / level;
    Ok(w.with_samples(w.samples.iter().map(|s| s * gain).collect()))
}

const SINC_HALF_TAPS: usize = 32;

/// Evaluates `x` at fractional positions `start + i * step` with a
/// Blackman-windowed sinc kernel. When `step > 1` the kernel is widened to
/// low-pass at the new Nyquist frequency.
pub(crate) fn sinc_interpolate(x: &[f64], step: f64, out_len: usize) -> Vec<f64> {
    let cutoff = (1.0 / step).min(1.0);
    let half = (SINC_HALF_TAPS as f64 / cutoff).ceil() as isize;
    let n = x.len() as isize;
    let mut out = Vec::with_capacity(out_len);
    for i in 0..out_len {
        let pos = i as f64 * step;
        let center = pos.floor() as isize;
        let mut acc = 0.0;
        for k in (center - half + 1)..=(center + half) {
            if k < 0 || k >= n {
                continue;
            }
            let d = pos - k as f64;
            let wpos = d / (half as f64);
            if wpos.abs() >= 1.0 {
                continue;
            }
            let window = 0.42 + 0.5 * (PI * wpos).cos() + 0.08 * (2.0 * PI * wpos).cos();
            let arg = PI * d * cutoff;
            let sinc = if arg.abs() < 1e-12 { 1.0 } else { arg.sin() / arg };
            acc += x[k as usize] * cutoff * sinc * window;
        }
        out.push(acc);
    }
    out
}

/// Band-limited conversion to `rate`.
pub fn resample(w: &Waveform, rate: u32) -> Result<Waveform> {
    if rate == 0 {
        return Err(DspError::Range("target rate must be positive".into()));
    }
    if rate == w.sample_rate {
        return Ok(w.clone());
    }
    let out_len = (w.len() as f64 * rate as f64 / w.sample_rate as f64).round() as usize;
    let step = w.sample_rate as f64 / rate as f64;
    Ok(Waveform {
        samples: sinc_interpolate(&w.samples, step, out_len),
        sample_rate: rate,
    })
}
