mod support;

use std::collections::BTreeMap;

use memorability_core::{
    generate_schedule, memorability_scores, spearman, split_half_consistency, Manifest, Schedule, ScheduleConfig,
    SessionLog, TaskType,
};
use num_rational::Ratio;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::*;

#[test]
fn hit_rates_match_rational_recount() {
    let manifest = default_manifest();
    let pool = schedule_pool(&manifest, 8, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..1000 {
        let (logs, schedules) = random_population(&pool, &mut rng);
        let oracle = brute_force_scores(&manifest, &logs, &schedules);
        let table = memorability_scores(&logs, &schedules).unwrap();
        assert_eq!(table.clips.len(), oracle.len());
        for (clip, r) in &oracle {
            let t = table.clips[clip];
            assert_eq!(Ratio::new(u64::from(t.hits), u64::from(t.n)), *r);
            assert_eq!(t.score(), *r.numer() as f64 / *r.denom() as f64);
        }
    }
}

fn check_schedule(manifest: &Manifest, s: &Schedule, cfg: &ScheduleConfig) {
    let mut positions: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, p) in s.presentations.iter().enumerate() {
        assert_eq!(p.position, i);
        positions.entry(p.clip_id.as_str()).or_default().push(i);
    }
    assert_eq!(positions.len(), manifest.len());
    for clip in manifest.clips() {
        let seen = &positions[clip.id.as_str()];
        match cfg.range(clip.task_type) {
            None => assert_eq!(seen.len(), 1, "{}", clip.id),
            Some((lo, hi)) => {
                assert_eq!(seen.len(), 2, "{}", clip.id);
                let gap = seen[1] - seen[0];
                assert!(lo <= gap && gap <= hi, "{} gap {gap} outside [{lo}, {hi}]", clip.id);
                assert!(!s.presentations[seen[0]].is_repeat && s.presentations[seen[1]].is_repeat);
            }
        }
    }
    for w in s.stage_boundaries.windows(2) {
        assert!(w[0] < w[1]);
    }
    for p in &s.presentations {
        let stage = s.stage_boundaries.iter().filter(|&&b| b <= p.position).count();
        assert_eq!(p.stage, stage);
    }
}

#[test]
fn default_manifest_schedules_are_valid() {
    let manifest = default_manifest();
    assert_eq!(manifest.len(), 235);
    for (task, n) in [
        (TaskType::Filler, 65),
        (TaskType::Vigilance, 21),
        (TaskType::TargetShort, 88),
        (TaskType::TargetMedium, 41),
        (TaskType::TargetLong, 20),
    ] {
        assert_eq!(manifest.count(task), n);
    }
    for seed in 0..100 {
        let cfg = ScheduleConfig::with_seed(seed);
        let s = generate_schedule(&manifest, &cfg).unwrap();
        assert_eq!(s.len(), 405);
        assert_eq!(s.stage_boundaries, vec![135, 270]);
        check_schedule(&manifest, &s, &cfg);
    }
}

#[test]
fn spearman_matches_brute_force_with_ties() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut checked = 0;
    while checked < 1000 {
        let a = tied_vector(&mut rng, 50);
        let b = tied_vector(&mut rng, 50);
        let Ok(r) = spearman(&a, &b) else { continue };
        assert!((r.rho - brute_spearman(&a, &b)).abs() < 1e-10);
        // strictly increasing maps preserve every rank, hence rho exactly
        let fa: Vec<f64> = a.iter().map(|x| x.exp()).collect();
        let fb: Vec<f64> = b.iter().map(|x| x * x * x + 10.0 * x).collect();
        assert_eq!(spearman(&fa, &fb).unwrap().rho, r.rho);
        checked += 1;
    }
}

fn split_half_population(
    n_annotators: usize,
    mut answer: impl FnMut(usize, &str, bool) -> bool,
) -> (Vec<SessionLog>, Vec<Schedule>) {
    let manifest = target_manifest(200, 0, 20);
    let pool = schedule_pool(&manifest, n_annotators, 5);
    let logs = pool
        .iter()
        .enumerate()
        .map(|(a, s)| {
            let mut seen = std::collections::BTreeSet::new();
            respond(&format!("a{a}"), s, |_, clip| {
                let second = !seen.insert(clip.to_string());
                Some(answer(a, clip, second))
            })
        })
        .collect();
    (logs, pool)
}

#[test]
fn identical_annotators_are_perfectly_consistent() {
    let (logs, schedules) = split_half_population(10, |_, clip, second| {
        second && clip.bytes().map(u32::from).sum::<u32>() % 3 != 0
    });
    let r = split_half_consistency(&logs, &schedules, 25, 1).unwrap();
    assert_eq!(r.mean_rho, 1.0);
    assert!(r.rhos.iter().all(|&x| x == 1.0));
}

#[test]
fn coin_flip_annotators_are_inconsistent() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (logs, schedules) = split_half_population(40, |_, _, _| rng.gen_bool(0.5));
    let r = split_half_consistency(&logs, &schedules, 25, 1).unwrap();
    assert!(r.mean_rho.abs() < 0.1, "mean rho {}", r.mean_rho);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn schedule_json_round_trip(seed in any::<u64>()) {
        let s = generate_schedule(&default_manifest(), &ScheduleConfig::with_seed(seed)).unwrap();
        let back = Schedule::from_json(&s.to_json()).unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn session_log_jsonl_round_trip(seed in 0u64..1000, skip in 0.0f64..0.9) {
        let s = &schedule_pool(&default_manifest(), 1, seed)[0];
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let log = respond("p", s, |_, _| (r.gen::<f64>() >= skip).then(|| r.gen_bool(0.5)));
        let (back, torn) = SessionLog::from_jsonl(&log.to_jsonl()).unwrap();
        prop_assert!(!torn);
        prop_assert_eq!(back, log);
    }

    #[test]
    fn manifest_json_round_trip(counts in prop::collection::vec(0usize..30, 5)) {
        let pairs: Vec<(TaskType, usize)> = TaskType::ALL.into_iter().zip(counts).collect();
        prop_assume!(pairs.iter().any(|p| p.1 > 0));
        let m = Manifest::with_counts(&pairs, std::path::Path::new("x"));
        prop_assert_eq!(Manifest::from_json(&m.to_json()).unwrap(), m);
    }
}
