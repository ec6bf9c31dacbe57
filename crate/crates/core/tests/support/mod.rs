//! Synthetic annotator populations and brute-force oracles shared by the
//! scoring tests and the acceptance suite.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;

use memorability_core::{
    fatigue_at, generate_schedule, Manifest, ResponseRecord, Schedule, ScheduleConfig, SessionLog, TaskType,
};
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn default_manifest() -> Manifest {
    Manifest::with_counts(&Manifest::DEFAULT_COUNTS, Path::new("audio"))
}

pub fn schedule_pool(manifest: &Manifest, n: usize, seed: u64) -> Vec<Schedule> {
    (0..n as u64)
        .map(|i| generate_schedule(manifest, &ScheduleConfig::with_seed(seed * 1000 + i)).unwrap())
        .collect()
}

/// Answers chosen by `answer(position, clip)`; positions where it returns
/// `None` are skipped.
pub fn respond(
    id: &str,
    schedule: &Schedule,
    mut answer: impl FnMut(usize, &str) -> Option<bool>,
) -> SessionLog {
    let mut log = SessionLog::new(id, format!("annotator-{id}"), schedule.seed);
    for p in &schedule.presentations {
        if let Some(yes) = answer(p.position, &p.clip_id) {
            log.push(ResponseRecord {
                position: p.position,
                clip_id: p.clip_id.clone(),
                answered_repeat: yes,
                reaction_ms: None,
                fatigue: fatigue_at(schedule, p.position).unwrap(),
            })
            .unwrap();
        }
    }
    log
}

/// A random population: 2 to 12 annotators drawing schedules from `pool`,
/// each with its own hit rate, false-alarm rate and skip rate.
pub fn random_population(pool: &[Schedule], rng: &mut ChaCha8Rng) -> (Vec<SessionLog>, Vec<Schedule>) {
    let n = rng.gen_range(2..=12);
    let mut logs = Vec::with_capacity(n);
    let mut schedules = Vec::with_capacity(n);
    for a in 0..n {
        let s = pool[rng.gen_range(0..pool.len())].clone();
        let hit: f64 = rng.gen();
        let fa: f64 = rng.gen::<f64>() * 0.5;
        let skip: f64 = rng.gen::<f64>() * 0.3;
        let mut seen = std::collections::BTreeSet::new();
        let mut r = ChaCha8Rng::seed_from_u64(rng.gen());
        let log = respond(&format!("s{a}"), &s, |_, clip| {
            let second = !seen.insert(clip.to_string());
            if r.gen::<f64>() < skip {
                return None;
            }
            Some(r.gen::<f64>() < if second { hit } else { fa })
        });
        logs.push(log);
        schedules.push(s);
    }
    (logs, schedules)
}

/// Hits over responders at each target clip's second presentation, found by
/// walking every schedule and log position by position.
pub fn brute_force_scores(
    manifest: &Manifest,
    logs: &[SessionLog],
    schedules: &[Schedule],
) -> BTreeMap<String, Ratio<u64>> {
    let mut counts: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for (log, s) in logs.iter().zip(schedules) {
        let mut occurrences: BTreeMap<&str, usize> = BTreeMap::new();
        for p in &s.presentations {
            let k = occurrences.entry(p.clip_id.as_str()).or_insert(0);
            *k += 1;
            let task = manifest.clip(&p.clip_id).unwrap().task_type;
            let target = matches!(
                task,
                TaskType::TargetShort | TaskType::TargetMedium | TaskType::TargetLong
            );
            if !target || *k != 2 {
                continue;
            }
            if let Some(r) = log.responses.iter().find(|r| r.position == p.position) {
                let e = counts.entry(p.clip_id.clone()).or_insert((0, 0));
                e.0 += u64::from(r.answered_repeat);
                e.1 += 1;
            }
        }
    }
    counts
        .into_iter()
        .map(|(k, (h, n))| (k, Ratio::new(h, n)))
        .collect()
}

/// Average ranks by counting, then the two-pass Pearson formula.
pub fn brute_spearman(a: &[f64], b: &[f64]) -> f64 {
    let rank = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|x| {
                let less = v.iter().filter(|y| *y < x).count() as f64;
                let equal = v.iter().filter(|y| *y == x).count() as f64;
                less + (equal + 1.0) / 2.0
            })
            .collect()
    };
    let (ra, rb) = (rank(a), rank(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for i in 0..a.len() {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma).powi(2);
        sbb += (rb[i] - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

/// 50 values drawn from a small integer range so ties are common.
pub fn tied_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let levels = rng.gen_range(3..=20);
    (0..n).map(|_| f64::from(rng.gen_range(0..levels)) * 0.5 - 3.0).collect()
}

/// Manifest where every clip is a short-interval target (200 by default).
pub fn target_manifest(n_targets: usize, n_vigilance: usize, n_fillers: usize) -> Manifest {
    Manifest::with_counts(
        &[
            (TaskType::Filler, n_fillers),
            (TaskType::Vigilance, n_vigilance),
            (TaskType::TargetShort, n_targets),
        ],
        Path::new("audio"),
    )
}
