//! Deterministic test signals.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio::Waveform;

fn len(secs: f64, rate: u32) -> usize {
    (secs * rate as f64).round() as usize
}

pub fn sine(freq: f64, amp: f64, secs: f64, rate: u32) -> Waveform {
    let samples = (0..len(secs, rate))
        .map(|i| amp * (2.0 * PI * freq * i as f64 / rate as f64).sin())
        .collect();
    Waveform {
        samples,
        sample_rate: rate,
    }
}

pub fn white_noise(amp: f64, secs: f64, rate: u32, seed: u64) -> Waveform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..len(secs, rate))
        .map(|_| amp * rng.gen_range(-1.0..1.0))
        .collect();
    Waveform {
        samples,
        sample_rate: rate,
    }
}

/// Short decaying noise bursts every `60 / bpm` seconds, starting at 0.
pub fn click_track(bpm: f64, secs: f64, rate: u32, seed: u64) -> Waveform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = len(secs, rate);
    let mut samples = vec![0.0; n];
    let period = 60.0 / bpm * rate as f64;
    let burst = (0.01 * rate as f64) as usize;
    let mut k = 0usize;
    loop {
        let start = (k as f64 * period).round() as usize;
        if start >= n {
            break;
        }
        for i in 0..burst.min(n - start) {
            let env = (-(i as f64) / (burst as f64 / 5.0)).exp();
            samples[start + i] = 0.8 * env * rng.gen_range(-1.0..1.0);
        }
        k += 1;
    }
    Waveform {
        samples,
        sample_rate: rate,
    }
}

/// A single full-scale sample followed by silence.
pub fn impulse(secs: f64, rate: u32) -> Waveform {
    let mut samples = vec![0.0; len(secs, rate).max(1)];
    samples[0] = 1.0;
    Waveform {
        samples,
        sample_rate: rate,
    }
}
