//! Fixtures shared by the CLI, service and acceptance tests: on-disk
//! corpora and a handle on a running service process.
#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use memorability_core::{Manifest, TaskType};
use memorability_dsp::audio::write_wav_i16;
use memorability_dsp::{synth, Waveform};
use serde_json::Value;

pub const BIN: &str = env!("CARGO_BIN_EXE_memorability");

pub fn bin() -> Command {
    let mut c = Command::new(BIN);
    c.env("RUST_LOG", "warn");
    c
}

/// Writes one short distinct noise file per clip and the manifest JSON.
/// The service only hashes and serves these bytes, so they need not be
/// full-length clips.
pub fn write_service_corpus(dir: &Path, counts: &[(TaskType, usize)]) -> PathBuf {
    let audio = dir.join("audio");
    std::fs::create_dir_all(&audio).unwrap();
    let manifest = Manifest::with_counts(counts, Path::new("audio"));
    for (i, c) in manifest.clips().iter().enumerate() {
        let w = synth::white_noise(0.1, 0.05, 8000, i as u64);
        write_wav_i16(&dir.join(&c.audio_path), &w).unwrap();
    }
    let path = dir.join("manifest.json");
    std::fs::write(&path, manifest.to_json()).unwrap();
    path
}

pub const SMALL_COUNTS: [(TaskType, usize); 3] =
    [(TaskType::Filler, 20), (TaskType::Vigilance, 4), (TaskType::TargetShort, 6)];

pub struct Service {
    pub child: Child,
    pub base: String,
    pub data_dir: PathBuf,
}

impl Service {
    pub fn start(manifest: &Path, data_dir: &Path, break_s: f64, seed_base: u64) -> Service {
        let mut child = bin()
            .args(["serve", "--port", "0", "--manifest"])
            .arg(manifest)
            .arg("--data-dir")
            .arg(data_dir)
            .args(["--break-s", &break_s.to_string(), "--seed-base", &seed_base.to_string()])
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .expect("service binary starts");
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let v: Value = serde_json::from_str(line.trim()).unwrap_or_else(|_| panic!("unexpected banner {line:?}"));
        Service {
            child,
            base: format!("http://{}", v["listening"].as_str().unwrap()),
            data_dir: data_dir.to_path_buf(),
        }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    /// SIGKILL, no shutdown path runs.
    pub fn kill(mut self) {
        self.child.kill().unwrap();
        self.child.wait().unwrap();
    }
}

impl Drop for Service {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub fn client() -> reqwest::blocking::Client {
    reqwest::blocking::Client::builder().timeout(Duration::from_secs(30)).build().unwrap()
}

pub fn create(c: &reqwest::blocking::Client, svc: &Service, annotator: &str) -> (u16, Value) {
    let r = c
        .post(svc.url("/api/sessions"))
        .json(&serde_json::json!({ "annotator_id": annotator }))
        .send()
        .unwrap();
    (r.status().as_u16(), r.json().unwrap_or(Value::Null))
}

pub fn next(c: &reqwest::blocking::Client, svc: &Service, id: &str) -> (u16, Value) {
    let r = c.get(svc.url(&format!("/api/sessions/{id}/next"))).send().unwrap();
    (r.status().as_u16(), r.json().unwrap_or(Value::Null))
}

pub fn answer(c: &reqwest::blocking::Client, svc: &Service, id: &str, position: u64, yes: bool) -> u16 {
    c.post(svc.url(&format!("/api/sessions/{id}/answers")))
        .json(&serde_json::json!({ "position": position, "answered_repeat": yes, "reaction_ms": 640 }))
        .send()
        .unwrap()
        .status()
        .as_u16()
}

/// Participant-facing payloads must not carry ground truth.
pub fn assert_no_ground_truth(v: &Value) {
    let text = v.to_string().to_lowercase();
    for word in ["task", "repeat", "target", "filler", "vigilance", "clip_id"] {
        assert!(!text.contains(word), "participant payload leaks {word:?}: {text}");
    }
}

/// Polls `next` through a break until a trial or the end arrives. Returns
/// the payload and whether a break was waited out.
pub fn next_trial(c: &reqwest::blocking::Client, svc: &Service, id: &str) -> (Value, bool) {
    let mut waited = false;
    let deadline = Instant::now() + Duration::from_secs(120);
    loop {
        let (status, v) = next(c, svc, id);
        assert_eq!(status, 200, "{v}");
        assert_no_ground_truth(&v);
        match v.get("break_remaining_s").and_then(Value::as_f64) {
            Some(left) => {
                waited = true;
                assert!(Instant::now() < deadline, "break never ended");
                std::thread::sleep(Duration::from_secs_f64(left.min(1.0)) + Duration::from_millis(20));
            }
            None => return (v, waited),
        }
    }
}

pub fn tone_wave(freq: f64, secs: f64, rate: u32) -> Waveform {
    synth::sine(freq, 0.1, secs, rate)
}

pub struct FeatureCorpus {
    pub manifest: PathBuf,
    pub stems: PathBuf,
    pub tags: PathBuf,
    pub bpms: Vec<f64>,
}

fn mix(parts: &[&Waveform]) -> Waveform {
    let n = parts.iter().map(|w| w.len()).min().unwrap();
    let samples = (0..n).map(|i| parts.iter().map(|w| w.samples[i]).sum()).collect();
    Waveform::new(samples, parts[0].sample_rate).unwrap()
}

/// Five-second clips at 22050 Hz built from four stems: a click track at a
/// per-clip tempo (drums), a bass tone, a melody tone (vocals) and noise.
/// Tag sidecars are written for every clip.
pub fn write_feature_corpus(dir: &Path, n: usize, seed: u64) -> FeatureCorpus {
    const RATE: u32 = 22050;
    let audio = dir.join("audio");
    let stems = dir.join("stems");
    let tags = dir.join("tags");
    for d in [&audio, &stems, &tags] {
        std::fs::create_dir_all(d).unwrap();
    }
    let manifest = Manifest::with_counts(&[(TaskType::Filler, n)], Path::new("audio"));
    let mut bpms = Vec::with_capacity(n);
    for (i, c) in manifest.clips().iter().enumerate() {
        let s = seed.wrapping_mul(1000).wrapping_add(i as u64);
        let bpm = 80.0 + 80.0 * ((i * 37 + seed as usize) % n) as f64 / n as f64;
        bpms.push(bpm);
        let drums = click_scaled(bpm, RATE, s, 0.3);
        let bass = synth::sine(55.0 * 2f64.powf((i % 12) as f64 / 12.0), 0.2, 5.0, RATE);
        let vocals = synth::sine(440.0 * 2f64.powf((i % 7) as f64 / 12.0), 0.1, 5.0, RATE);
        let other = synth::white_noise(0.02 + 0.01 * (i % 3) as f64, 5.0, RATE, s);
        let clip_stems = stems.join(&c.id);
        std::fs::create_dir_all(&clip_stems).unwrap();
        for (name, w) in [("vocals", &vocals), ("bass", &bass), ("drums", &drums), ("other", &other)] {
            write_wav_i16(&clip_stems.join(format!("{name}.wav")), w).unwrap();
        }
        write_wav_i16(&dir.join(&c.audio_path), &mix(&[&drums, &bass, &vocals, &other])).unwrap();
        let t = serde_json::json!({ "Music": 0.5 + 0.5 * (i % 5) as f64 / 5.0, "Musical Instrument": 0.3 + 0.1 * (i % 4) as f64 });
        std::fs::write(tags.join(format!("{}.tags.json", c.id)), t.to_string()).unwrap();
    }
    let path = dir.join("manifest.json");
    std::fs::write(&path, manifest.to_json()).unwrap();
    FeatureCorpus {
        manifest: path,
        stems,
        tags,
        bpms,
    }
}

fn click_scaled(bpm: f64, rate: u32, seed: u64, gain: f64) -> Waveform {
    let mut w = synth::click_track(bpm, 5.0, rate, seed);
    w.samples.iter_mut().for_each(|x| *x *= gain);
    w
}

/// Mood-model training CSV over the 38 base feature names with targets
/// drawn in [0, 1].
pub fn write_mood_dataset(path: &Path, names: &[String], rows: usize, seed: u64) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = names.join(",") + ",valence,arousal\n";
    for _ in 0..rows {
        let x: Vec<f64> = (0..names.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v = (0.5 + 0.2 * x[0]).clamp(0.0, 1.0);
        let a = (0.5 - 0.2 * x[1]).clamp(0.0, 1.0);
        let cells: Vec<String> = x.iter().map(f64::to_string).collect();
        out += &format!("{},{v},{a}\n", cells.join(","));
    }
    std::fs::write(path, out).unwrap();
}
