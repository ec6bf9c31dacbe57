//! Memorability labels and their quality statistics.
//!
//! The score of a target clip is the fraction of annotators who answered
//! "repeated" at its second presentation. A "repeated" answer at the first
//! presentation is tallied as a false alarm and does not alter the score.

use std::collections::{BTreeMap, BTreeSet};
use std::io;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::scheduler::Schedule;
use crate::session::SessionLog;
use crate::stats::{ols, spearman, RankCorrelation};
use crate::types::TaskType;

/// Default vigilance gate: sessions below this accuracy are discarded.
pub const VIGILANCE_THRESHOLD: f64 = 0.60;

/// Integer tallies behind one clip's score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClipTally {
    /// Annotators answering "repeated" at the second presentation.
    pub hits: u32,
    /// Annotators with a response at the second presentation (n_i).
    pub n: u32,
    /// Of those, annotators answering "repeated" at the first presentation.
    pub false_alarms: u32,
    /// Of those, annotators with a response at the first presentation.
    pub first_responses: u32,
}

impl ClipTally {
    pub fn score(&self) -> f64 {
        self.hits as f64 / self.n as f64
    }

    pub fn false_alarm_rate(&self) -> f64 {
        if self.first_responses == 0 {
            0.0
        } else {
            self.false_alarms as f64 / self.first_responses as f64
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MemorabilityTable {
    pub clips: BTreeMap<String, ClipTally>,
    /// Target clips that appeared in some schedule but received no response
    /// at their second presentation.
    pub unscored: BTreeSet<String>,
}

impl MemorabilityTable {
    pub fn score(&self, clip_id: &str) -> Option<f64> {
        self.clips.get(clip_id).map(ClipTally::score)
    }

    pub fn scores(&self) -> BTreeMap<String, f64> {
        self.clips.iter().map(|(k, t)| (k.clone(), t.score())).collect()
    }

    pub fn n_annotators(&self) -> BTreeMap<String, u32> {
        self.clips.iter().map(|(k, t)| (k.clone(), t.n)).collect()
    }

    pub fn false_alarm_rate(&self) -> BTreeMap<String, f64> {
        self.clips
            .iter()
            .map(|(k, t)| (k.clone(), t.false_alarm_rate()))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }

    /// CSV with header `clip_id,score,n,false_alarm_rate`.
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| CoreError::Parse(e.to_string());
        w.write_record(["clip_id", "score", "n", "false_alarm_rate"])
            .map_err(err)?;
        for (id, t) in &self.clips {
            w.write_record([
                id.as_str(),
                &t.score().to_string(),
                &t.n.to_string(),
                &t.false_alarm_rate().to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| CoreError::Parse(e.to_string()))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// Reads `clip_id,score` (and optionally `n`) columns; other columns are
    /// ignored. Only the scores are recovered exactly.
    pub fn read_scores_csv<R: io::Read>(input: R) -> Result<BTreeMap<String, f64>> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers().map_err(|e| CoreError::Parse(e.to_string()))?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| CoreError::Parse(format!("missing column {name:?}")))
        };
        let (id_col, score_col) = (col("clip_id")?, col("score")?);
        let mut out = BTreeMap::new();
        for row in r.records() {
            let row = row.map_err(|e| CoreError::Parse(e.to_string()))?;
            let score: f64 = row[score_col]
                .parse()
                .map_err(|e| CoreError::Parse(format!("score {:?}: {e}", &row[score_col])))?;
            out.insert(row[id_col].to_string(), score);
        }
        Ok(out)
    }
}

fn check_aligned(logs: &[SessionLog], schedules: &[Schedule]) -> Result<()> {
    if logs.len() != schedules.len() {
        return Err(CoreError::LengthMismatch(logs.len(), schedules.len()));
    }
    Ok(())
}

/// Fraction of vigilance second presentations answered "repeated".
pub fn vigilance_accuracy(log: &SessionLog, schedule: &Schedule) -> Result<f64> {
    let positions: Vec<usize> = schedule
        .repeated_pairs()
        .into_iter()
        .filter(|p| p.1 == TaskType::Vigilance)
        .map(|p| p.3)
        .collect();
    if positions.is_empty() {
        return Err(CoreError::InsufficientData(
            "schedule contains no vigilance repeats".into(),
        ));
    }
    let mut hits = 0usize;
    let mut missing = Vec::new();
    for &pos in &positions {
        match log.response_at(pos) {
            Some(r) => hits += usize::from(r.answered_repeat),
            None => missing.push(pos),
        }
    }
    if !missing.is_empty() {
        return Err(CoreError::Incomplete {
            session_id: log.session_id.clone(),
            missing,
        });
    }
    Ok(hits as f64 / positions.len() as f64)
}

/// Outcome of vigilance gating.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FilterReport {
    /// Indices (into the input) of sessions that passed.
    pub kept: Vec<usize>,
    pub accuracies: Vec<Option<f64>>,
    /// Sessions below the threshold.
    pub rejected_low: Vec<usize>,
    /// Sessions whose vigilance accuracy could not be computed.
    pub rejected_incomplete: Vec<usize>,
}

impl FilterReport {
    pub fn select<T: Clone>(&self, items: &[T]) -> Vec<T> {
        self.kept.iter().map(|&i| items[i].clone()).collect()
    }
}

/// Keeps sessions whose vigilance accuracy is at least `threshold`
/// (accuracy strictly below the threshold is discarded).
pub fn filter_sessions(
    logs: &[SessionLog],
    schedules: &[Schedule],
    threshold: f64,
) -> Result<FilterReport> {
    check_aligned(logs, schedules)?;
    if !(0.0..=1.0).contains(&threshold) {
        return Err(CoreError::Validation(format!(
            "threshold {threshold} outside [0, 1]"
        )));
    }
    let mut report = FilterReport::default();
    for (i, (log, schedule)) in logs.iter().zip(schedules).enumerate() {
        match vigilance_accuracy(log, schedule) {
            Ok(acc) => {
                report.accuracies.push(Some(acc));
                if acc >= threshold {
                    report.kept.push(i);
                } else {
                    report.rejected_low.push(i);
                }
            }
            Err(e) => {
                tracing::info!(session = %log.session_id, error = %e, "discarding session");
                report.accuracies.push(None);
                report.rejected_incomplete.push(i);
            }
        }
    }
    Ok(report)
}

/// Per-clip memorability over already-gated sessions.
pub fn memorability_scores(
    logs: &[SessionLog],
    schedules: &[Schedule],
) -> Result<MemorabilityTable> {
    check_aligned(logs, schedules)?;
    let mut table = MemorabilityTable::default();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    for (log, schedule) in logs.iter().zip(schedules) {
        for (clip, task, first, second) in schedule.repeated_pairs() {
            if !task.is_target() {
                continue;
            }
            seen.insert(clip.to_string());
            let Some(answer) = log.response_at(second) else {
                continue;
            };
            let tally = table.clips.entry(clip.to_string()).or_default();
            tally.n += 1;
            tally.hits += u32::from(answer.answered_repeat);
            if let Some(first_answer) = log.response_at(first) {
                tally.first_responses += 1;
                tally.false_alarms += u32::from(first_answer.answered_repeat);
            }
        }
    }
    table.unscored = seen
        .into_iter()
        .filter(|c| !table.clips.contains_key(c))
        .collect();
    if table.clips.is_empty() {
        return Err(CoreError::NoData);
    }
    if !table.unscored.is_empty() {
        tracing::warn!(count = table.unscored.len(), "target clips without responses omitted");
    }
    Ok(table)
}

/// Spearman correlation over the clips both tables scored.
pub fn cross_condition_correlation(
    a: &MemorabilityTable,
    b: &MemorabilityTable,
) -> Result<RankCorrelation> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = a
        .clips
        .iter()
        .filter_map(|(id, ta)| b.clips.get(id).map(|tb| (ta.score(), tb.score())))
        .unzip();
    if xs.len() < 2 {
        return Err(CoreError::InsufficientOverlap(xs.len()));
    }
    spearman(&xs, &ys)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitHalfReport {
    pub mean_rho: f64,
    pub rhos: Vec<f64>,
}

/// Mean Spearman correlation between scores from random annotator halves.
///
/// Each split shuffles the session indices with a seeded generator and cuts
/// the list in two (the second half gets the odd one out). Clips scored by
/// only one half are left out of that split.
pub fn split_half_consistency(
    logs: &[SessionLog],
    schedules: &[Schedule],
    n_splits: usize,
    seed: u64,
) -> Result<SplitHalfReport> {
    check_aligned(logs, schedules)?;
    if logs.len() < 4 {
        return Err(CoreError::InsufficientData(format!(
            "split-half needs at least 4 sessions, got {}",
            logs.len()
        )));
    }
    if n_splits == 0 {
        return Err(CoreError::Validation("n_splits must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..logs.len()).collect();
    let half = logs.len() / 2;
    let mut rhos = Vec::with_capacity(n_splits);
    for _ in 0..n_splits {
        idx.shuffle(&mut rng);
        let pick = |part: &[usize]| -> (Vec<SessionLog>, Vec<Schedule>) {
            part.iter()
                .map(|&i| (logs[i].clone(), schedules[i].clone()))
                .unzip()
        };
        let (la, sa) = pick(&idx[..half]);
        let (lb, sb) = pick(&idx[half..]);
        let ta = memorability_scores(&la, &sa)?;
        let tb = memorability_scores(&lb, &sb)?;
        rhos.push(cross_condition_correlation(&ta, &tb)?.rho);
    }
    let mean_rho = rhos.iter().sum::<f64>() / rhos.len() as f64;
    Ok(SplitHalfReport { mean_rho, rhos })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalFatigueFit {
    pub slope_log_interval: f64,
    pub slope_fatigue: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Standard errors in the order (log interval, fatigue, intercept).
    pub std_errors: [f64; 3],
    pub n: usize,
}

/// Least squares of score on `[ln(interval), fatigue, 1]` over the clips
/// present in all three inputs.
pub fn fit_interval_fatigue_model(
    table: &MemorabilityTable,
    intervals: &BTreeMap<String, f64>,
    fatigues: &BTreeMap<String, f64>,
) -> Result<IntervalFatigueFit> {
    let mut design = Vec::new();
    let mut y = Vec::new();
    for (id, tally) in &table.clips {
        let (Some(&interval), Some(&fatigue)) = (intervals.get(id), fatigues.get(id)) else {
            continue;
        };
        if !(interval >= 1.0) {
            return Err(CoreError::Validation(format!(
                "clip {id:?} has repeat interval {interval} < 1"
            )));
        }
        design.push(vec![interval.ln(), fatigue, 1.0]);
        y.push(tally.score());
    }
    if y.len() < 3 {
        return Err(CoreError::InsufficientData(format!(
            "interval/fatigue fit needs 3 clips, got {}",
            y.len()
        )));
    }
    let fit = ols(&design, &y)?;
    Ok(IntervalFatigueFit {
        slope_log_interval: fit.coefficients[0],
        slope_fatigue: fit.coefficients[1],
        intercept: fit.coefficients[2],
        r2: fit.r2,
        std_errors: [fit.std_errors[0], fit.std_errors[1], fit.std_errors[2]],
        n: y.len(),
    })
}

/// Mean repeat interval and mean fatigue (at the second presentation) per
/// target clip, across the given sessions.
pub fn interval_fatigue_summary(
    logs: &[SessionLog],
    schedules: &[Schedule],
) -> Result<(BTreeMap<String, f64>, BTreeMap<String, f64>)> {
    check_aligned(logs, schedules)?;
    let mut acc: BTreeMap<String, (f64, f64, usize)> = BTreeMap::new();
    for (log, schedule) in logs.iter().zip(schedules) {
        for (clip, task, first, second) in schedule.repeated_pairs() {
            if !task.is_target() {
                continue;
            }
            if let Some(r) = log.response_at(second) {
                let e = acc.entry(clip.to_string()).or_default();
                e.0 += (second - first) as f64;
                e.1 += r.fatigue as f64;
                e.2 += 1;
            }
        }
    }
    let intervals = acc
        .iter()
        .map(|(k, &(i, _, n))| (k.clone(), i / n as f64))
        .collect();
    let fatigues = acc
        .iter()
        .map(|(k, &(_, f, n))| (k.clone(), f / n as f64))
        .collect();
    Ok((intervals, fatigues))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheduler::{fatigue_at, generate_schedule, ScheduleConfig};
    use crate::session::ResponseRecord;
    use crate::types::Manifest;
    use std::path::Path;

    fn schedule() -> Schedule {
        let m = Manifest::with_counts(&Manifest::DEFAULT_COUNTS, Path::new("a"));
        generate_schedule(&m, &ScheduleConfig::with_seed(11)).unwrap()
    }

    /// Answers every presentation; `yes(position, presentation)` decides.
    fn answer_all(
        id: &str,
        schedule: &Schedule,
        yes: impl Fn(&crate::scheduler::Presentation) -> bool,
    ) -> SessionLog {
        let mut log = SessionLog::new(id, format!("ann-{id}"), schedule.seed);
        for p in &schedule.presentations {
            log.push(ResponseRecord {
                position: p.position,
                clip_id: p.clip_id.clone(),
                answered_repeat: yes(p),
                reaction_ms: None,
                fatigue: fatigue_at(schedule, p.position).unwrap(),
            })
            .unwrap();
        }
        log
    }

    fn vigilance_yes_count(count: usize, s: &Schedule) -> SessionLog {
        let vig: Vec<usize> = s
            .repeated_pairs()
            .into_iter()
            .filter(|p| p.1 == TaskType::Vigilance)
            .map(|p| p.3)
            .collect();
        let yes: BTreeSet<usize> = vig.into_iter().take(count).collect();
        answer_all("s", s, |p| yes.contains(&p.position))
    }

    #[test]
    fn vigilance_accuracy_examples() {
        let s = schedule();
        assert_eq!(vigilance_accuracy(&vigilance_yes_count(21, &s), &s).unwrap(), 1.0);
        let acc = vigilance_accuracy(&vigilance_yes_count(12, &s), &s).unwrap();
        assert_eq!(acc, 12.0 / 21.0);
        assert!(acc < VIGILANCE_THRESHOLD);
        assert_eq!(vigilance_accuracy(&vigilance_yes_count(0, &s), &s).unwrap(), 0.0);
    }

    #[test]
    fn vigilance_missing_response_is_incomplete() {
        let s = schedule();
        let mut log = vigilance_yes_count(21, &s);
        log.responses.truncate(5);
        assert!(matches!(
            vigilance_accuracy(&log, &s),
            Err(CoreError::Incomplete { .. })
        ));
    }

    #[test]
    fn filter_boundary_semantics() {
        let s = schedule();
        // 0.7 is not reachable with 21 items; use 15/21 ≈ 0.714, 12/21 ≈ 0.571
        // and a custom schedule-free check via accuracies is covered in
        // the acceptance suite; here exercise the exact 0.6 boundary with a
        // threshold equal to an attainable accuracy.
        let logs = vec![
            vigilance_yes_count(15, &s),
            vigilance_yes_count(12, &s),
            vigilance_yes_count(13, &s),
        ];
        let schedules = vec![s.clone(), s.clone(), s.clone()];
        let threshold = 13.0 / 21.0;
        let report = filter_sessions(&logs, &schedules, threshold).unwrap();
        assert_eq!(report.kept, vec![0, 2]);
        assert_eq!(report.rejected_low, vec![1]);

        let kept = report.select(&logs);
        let kept_s = report.select(&schedules);
        let again = filter_sessions(&kept, &kept_s, threshold).unwrap();
        assert_eq!(again.kept, vec![0, 1]);
    }

    #[test]
    fn filter_empty_and_incomplete() {
        let r = filter_sessions(&[], &[], 0.6).unwrap();
        assert!(r.kept.is_empty());
        let s = schedule();
        let mut log = vigilance_yes_count(21, &s);
        log.responses.clear();
        let r = filter_sessions(&[log], &[s], 0.6).unwrap();
        assert_eq!(r.rejected_incomplete, vec![0]);
        assert!(filter_sessions(&[], &[], 1.5).is_err());
    }

    #[test]
    fn hit_rate_arithmetic() {
        let s = schedule();
        let (target, _, _, second) = s
            .repeated_pairs()
            .into_iter()
            .find(|p| p.1.is_target())
            .unwrap();
        let target = target.to_string();
        let outcomes = [true, false, true, true];
        let logs: Vec<SessionLog> = outcomes
            .iter()
            .enumerate()
            .map(|(j, &hit)| answer_all(&format!("s{j}"), &s, |p| p.position == second && hit))
            .collect();
        let table = memorability_scores(&logs, &vec![s.clone(); 4]).unwrap();
        assert_eq!(table.score(&target), Some(0.75));
        assert_eq!(table.clips[&target].n, 4);
        assert_eq!(table.clips[&target].false_alarm_rate(), 0.0);

        let all_yes: Vec<SessionLog> = (0..3).map(|j| answer_all(&format!("y{j}"), &s, |_| true)).collect();
        let t = memorability_scores(&all_yes, &vec![s.clone(); 3]).unwrap();
        assert!(t.clips.values().all(|c| c.score() == 1.0 && c.false_alarm_rate() == 1.0));
        // only targets are scored
        assert_eq!(t.len(), 88 + 41 + 20);
    }

    #[test]
    fn no_responses_is_no_data() {
        let s = schedule();
        let log = SessionLog::new("e", "a", 0);
        assert!(matches!(memorability_scores(&[log], &[s]), Err(CoreError::NoData)));
    }

    #[test]
    fn csv_export_round_trip_scores() {
        let s = schedule();
        let logs: Vec<SessionLog> = (0..3)
            .map(|j| answer_all(&format!("s{j}"), &s, |p| (p.position + j) % 3 == 0))
            .collect();
        let table = memorability_scores(&logs, &vec![s; 3]).unwrap();
        let csv = table.to_csv_string();
        assert!(csv.starts_with("clip_id,score,n,false_alarm_rate\n"));
        let back = MemorabilityTable::read_scores_csv(csv.as_bytes()).unwrap();
        assert_eq!(back, table.scores());
    }

    #[test]
    fn cross_condition_examples() {
        let s = schedule();
        let logs: Vec<SessionLog> = (0..5)
            .map(|j| answer_all(&format!("s{j}"), &s, |p| (p.position * 7 + j) % 11 < 4))
            .collect();
        let t = memorability_scores(&logs, &vec![s; 5]).unwrap();
        assert_eq!(cross_condition_correlation(&t, &t).unwrap().rho, 1.0);
        let mut other = MemorabilityTable::default();
        other.clips.insert("zzz".into(), ClipTally { hits: 1, n: 1, ..Default::default() });
        assert!(matches!(
            cross_condition_correlation(&t, &other),
            Err(CoreError::InsufficientOverlap(0))
        ));
    }

    fn table_from(scores: &[(String, u32, u32)]) -> MemorabilityTable {
        let mut t = MemorabilityTable::default();
        for (id, hits, n) in scores {
            t.clips.insert(id.clone(), ClipTally { hits: *hits, n: *n, ..Default::default() });
        }
        t
    }

    #[test]
    fn planted_log_interval_model() {
        // scores on a 1/1000 grid so the table can represent them exactly
        let mut rows = Vec::new();
        let mut intervals = BTreeMap::new();
        let mut fatigues = BTreeMap::new();
        for i in 0..30u32 {
            let interval = 5.0 + 9.0 * i as f64;
            let fatigue = ((i * 37) % 50) as f64 + 1.0;
            let m: f64 = -0.1 * interval.ln() + 0.9;
            let id = format!("c{i}");
            intervals.insert(id.clone(), interval);
            fatigues.insert(id.clone(), fatigue);
            rows.push((id, m, fatigue));
        }
        let mut t = MemorabilityTable::default();
        for (id, m, _) in &rows {
            // store as hits/n with large n so score() ≈ m; exactness is not needed here
            let n = 1_000_000u32;
            t.clips.insert(id.clone(), ClipTally { hits: (m * n as f64).round() as u32, n, ..Default::default() });
        }
        let fit = fit_interval_fatigue_model(&t, &intervals, &fatigues).unwrap();
        assert!((fit.slope_log_interval + 0.1).abs() < 1e-5, "{fit:?}");
        assert!(fit.slope_fatigue.abs() < 1e-6);
        assert!((fit.intercept - 0.9).abs() < 1e-5);
        assert!((fit.r2 - 1.0).abs() < 1e-8);
    }

    #[test]
    fn constant_scores_give_zero_slopes() {
        let rows: Vec<(String, u32, u32)> = (0..10).map(|i| (format!("c{i}"), 1, 2)).collect();
        let t = table_from(&rows);
        let intervals = rows.iter().enumerate().map(|(i, r)| (r.0.clone(), 2.0 + i as f64)).collect();
        let fatigues = rows.iter().enumerate().map(|(i, r)| (r.0.clone(), ((i * 3) % 7) as f64)).collect();
        let fit = fit_interval_fatigue_model(&t, &intervals, &fatigues).unwrap();
        assert!(fit.slope_log_interval.abs() < 1e-12);
        assert!(fit.slope_fatigue.abs() < 1e-12);
        assert!((fit.intercept - 0.5).abs() < 1e-12);
    }

    #[test]
    fn collinear_design_is_singular() {
        let rows: Vec<(String, u32, u32)> = (0..6).map(|i| (format!("c{i}"), i, 10)).collect();
        let t = table_from(&rows);
        let intervals: BTreeMap<String, f64> = rows.iter().map(|r| (r.0.clone(), 10.0)).collect();
        let fatigues: BTreeMap<String, f64> = rows.iter().map(|r| (r.0.clone(), 3.0)).collect();
        assert!(matches!(
            fit_interval_fatigue_model(&t, &intervals, &fatigues),
            Err(CoreError::Singular)
        ));
    }

    #[test]
    fn interval_fatigue_summary_matches_schedule() {
        let s = schedule();
        let log = answer_all("s", &s, |_| false);
        let (intervals, fatigues) = interval_fatigue_summary(&[log], &[s.clone()]).unwrap();
        for (clip, task, first, second) in s.repeated_pairs() {
            if task.is_target() {
                assert_eq!(intervals[clip], (second - first) as f64);
                assert_eq!(fatigues[clip], fatigue_at(&s, second).unwrap() as f64);
            }
        }
    }
}
