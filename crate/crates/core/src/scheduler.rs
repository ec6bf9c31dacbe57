//! Memory-game trial sequences.
//!
//! Fillers are presented once; vigilance and target clips twice, with the
//! gap between the two presentations (difference of presentation indices)
//! drawn inside the category's interval range. The session is cut into
//! contiguous stages separated by breaks; breaks are not presentations and
//! repeated pairs may straddle them.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::types::{Manifest, TaskType};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub n_stages: usize,
    pub break_s: f64,
    /// Inclusive `(min, max)` repeat gap per repeated task type.
    pub interval_range: BTreeMap<TaskType, (usize, usize)>,
    pub seed: u64,
    /// Placement/unplacement steps allowed before giving up.
    pub max_steps: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            n_stages: 3,
            break_s: 180.0,
            interval_range: BTreeMap::from([
                (TaskType::Vigilance, (5, 10)),
                (TaskType::TargetShort, (10, 49)),
                (TaskType::TargetMedium, (61, 131)),
                (TaskType::TargetLong, (155, 276)),
            ]),
            seed: 0,
            max_steps: 10_000,
        }
    }
}

impl ScheduleConfig {
    pub fn with_seed(seed: u64) -> Self {
        ScheduleConfig {
            seed,
            ..Default::default()
        }
    }

    pub fn range(&self, task: TaskType) -> Option<(usize, usize)> {
        self.interval_range.get(&task).copied()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_stages == 0 {
            return Err(CoreError::Validation("n_stages must be at least 1".into()));
        }
        if !(self.break_s.is_finite() && self.break_s >= 0.0) {
            return Err(CoreError::Validation("break_s must be non-negative".into()));
        }
        for (task, &(lo, hi)) in &self.interval_range {
            if !task.is_repeated() {
                return Err(CoreError::Validation(format!(
                    "interval range given for non-repeated task {task}"
                )));
            }
            if lo < 1 || lo > hi {
                return Err(CoreError::Validation(format!(
                    "invalid interval range ({lo}, {hi}) for {task}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Presentation {
    pub position: usize,
    pub stage: usize,
    pub clip_id: String,
    pub task_type: TaskType,
    pub is_repeat: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub presentations: Vec<Presentation>,
    /// Positions of the first presentation after each break.
    pub stage_boundaries: Vec<usize>,
    pub seed: u64,
}

impl Schedule {
    pub fn len(&self) -> usize {
        self.presentations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.presentations.is_empty()
    }

    pub fn n_stages(&self) -> usize {
        self.stage_boundaries.len() + 1
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CoreError::Parse(e.to_string()))
    }

    /// Positions of the first and second presentation of `clip_id`.
    pub fn repeat_positions(&self, clip_id: &str) -> Option<(usize, usize)> {
        let mut hits = self
            .presentations
            .iter()
            .filter(|p| p.clip_id == clip_id)
            .map(|p| p.position);
        match (hits.next(), hits.next(), hits.next()) {
            (Some(a), Some(b), None) => Some((a, b)),
            _ => None,
        }
    }

    /// `(clip_id, task, first, second)` for every repeated clip, in order of
    /// first appearance.
    pub fn repeated_pairs(&self) -> Vec<(&str, TaskType, usize, usize)> {
        let mut firsts: BTreeMap<&str, (TaskType, usize)> = BTreeMap::new();
        let mut pairs = Vec::new();
        for p in &self.presentations {
            if p.is_repeat {
                if let Some(&(task, first)) = firsts.get(p.clip_id.as_str()) {
                    pairs.push((p.clip_id.as_str(), task, first, p.position));
                }
            } else {
                firsts.insert(&p.clip_id, (p.task_type, p.position));
            }
        }
        pairs.sort_by_key(|&(_, _, first, _)| first);
        pairs
    }
}

/// Splits `n` presentations into at most `n_stages` contiguous, near-equal
/// blocks and returns the start index of every block after the first.
pub fn stage_boundaries(n: usize, n_stages: usize) -> Vec<usize> {
    let stages = n_stages.min(n).max(1);
    let base = n / stages;
    let extra = n % stages;
    let mut boundaries = Vec::with_capacity(stages - 1);
    let mut start = 0;
    for s in 0..stages - 1 {
        start += base + usize::from(s < extra);
        boundaries.push(start);
    }
    boundaries
}

/// Builds a randomized schedule honouring every interval constraint.
///
/// Repeated clips are placed longest-interval category first (shuffled
/// within a category): the first occurrence goes to a random free slot that
/// still has a free partner inside the legal window, the second to a random
/// free slot in that window. If a clip has no legal placement the previous
/// clip is lifted and re-drawn. Fillers take the remaining slots.
pub fn generate_schedule(manifest: &Manifest, cfg: &ScheduleConfig) -> Result<Schedule> {
    cfg.validate()?;
    if manifest.is_empty() {
        return Err(CoreError::Validation("manifest has no clips".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut repeated: Vec<(usize, (usize, usize))> = Vec::new();
    let mut fillers: Vec<usize> = Vec::new();
    for (i, clip) in manifest.clips().iter().enumerate() {
        if clip.task_type.is_repeated() {
            let range = cfg.range(clip.task_type).ok_or_else(|| {
                CoreError::Validation(format!("no interval range for {}", clip.task_type))
            })?;
            repeated.push((i, range));
        } else {
            fillers.push(i);
        }
    }
    let n = fillers.len() + 2 * repeated.len();
    for &(i, (lo, _)) in &repeated {
        if lo >= n {
            return Err(CoreError::Infeasible {
                clip_id: manifest.clips()[i].id.clone(),
                reason: format!("minimum gap {lo} exceeds session length {n}"),
            });
        }
    }

    // Longest categories first; shuffle inside each category.
    let mut by_range: BTreeMap<std::cmp::Reverse<(usize, usize)>, Vec<usize>> = BTreeMap::new();
    for &(i, range) in &repeated {
        by_range.entry(std::cmp::Reverse((range.1, range.0))).or_default().push(i);
    }
    let mut order: Vec<(usize, (usize, usize))> = Vec::with_capacity(repeated.len());
    for (std::cmp::Reverse((hi, lo)), mut clips) in by_range {
        clips.shuffle(&mut rng);
        order.extend(clips.into_iter().map(|i| (i, (lo, hi))));
    }

    let mut slots: Vec<Option<usize>> = vec![None; n];
    let mut placed: Vec<(usize, usize)> = Vec::with_capacity(order.len());
    let mut steps = 0usize;
    let mut deepest_failure: Option<usize> = None;
    while placed.len() < order.len() {
        let depth = placed.len();
        let (clip, (lo, hi)) = order[depth];
        match draw_pair(&slots, lo, hi, &mut rng) {
            Some((a, b)) => {
                slots[a] = Some(clip);
                slots[b] = Some(clip);
                placed.push((a, b));
            }
            None => {
                if deepest_failure.is_none_or(|d| depth > d) {
                    deepest_failure = Some(depth);
                }
                let Some((a, b)) = placed.pop() else {
                    return Err(infeasible(manifest, &order, depth, "no legal slot pair"));
                };
                slots[a] = None;
                slots[b] = None;
            }
        }
        steps += 1;
        if steps > cfg.max_steps {
            let at = deepest_failure.unwrap_or(depth);
            return Err(infeasible(
                manifest,
                &order,
                at,
                &format!("backtracking limit of {} steps reached", cfg.max_steps),
            ));
        }
    }

    fillers.shuffle(&mut rng);
    let mut fillers = fillers.into_iter();
    for slot in slots.iter_mut().filter(|s| s.is_none()) {
        *slot = fillers.next();
    }

    let boundaries = stage_boundaries(n, cfg.n_stages);
    let mut seen = vec![false; manifest.len()];
    let presentations = slots
        .into_iter()
        .enumerate()
        .map(|(position, slot)| {
            let idx = slot.expect("every slot filled");
            let clip = &manifest.clips()[idx];
            let is_repeat = std::mem::replace(&mut seen[idx], true);
            Presentation {
                position,
                stage: boundaries.partition_point(|&b| b <= position),
                clip_id: clip.id.clone(),
                task_type: clip.task_type,
                is_repeat,
            }
        })
        .collect();
    Ok(Schedule {
        presentations,
        stage_boundaries: boundaries,
        seed: cfg.seed,
    })
}

fn infeasible(
    manifest: &Manifest,
    order: &[(usize, (usize, usize))],
    depth: usize,
    reason: &str,
) -> CoreError {
    CoreError::Infeasible {
        clip_id: manifest.clips()[order[depth].0].id.clone(),
        reason: reason.to_string(),
    }
}

/// Uniformly picks a legal first slot, then a uniformly random partner in
/// `[first + lo, first + hi]`.
fn draw_pair(
    slots: &[Option<usize>],
    lo: usize,
    hi: usize,
    rng: &mut impl Rng,
) -> Option<(usize, usize)> {
    let n = slots.len();
    // free_prefix[i] = number of free slots in [0, i)
    let mut free_prefix = Vec::with_capacity(n + 1);
    free_prefix.push(0usize);
    for s in slots {
        free_prefix.push(free_prefix.last().unwrap() + usize::from(s.is_none()));
    }
    let window = |first: usize| -> Option<(usize, usize)> {
        let start = first + lo;
        if start >= n {
            return None;
        }
        let end = (first + hi).min(n - 1);
        Some((start, end))
    };
    let candidates: Vec<usize> = (0..n)
        .filter(|&p| slots[p].is_none())
        .filter(|&p| {
            window(p).is_some_and(|(s, e)| free_prefix[e + 1] - free_prefix[s] > 0)
        })
        .collect();
    let &first = candidates.choose(rng)?;
    let (s, e) = window(first)?;
    let partners: Vec<usize> = (s..=e).filter(|&q| slots[q].is_none()).collect();
    let &second = partners.choose(rng)?;
    Some((first, second))
}

/// Presentation gap between the two occurrences of `clip_id`.
pub fn interval_of(schedule: &Schedule, clip_id: &str) -> Result<usize> {
    schedule
        .repeat_positions(clip_id)
        .map(|(a, b)| b - a)
        .ok_or_else(|| CoreError::NotRepeated(clip_id.to_string()))
}

/// Presentations heard since the most recent break, counting the one at
/// `position` as 1.
pub fn fatigue_at(schedule: &Schedule, position: usize) -> Result<u32> {
    if position >= schedule.len() {
        return Err(CoreError::Index {
            position,
            len: schedule.len(),
        });
    }
    let idx = schedule.stage_boundaries.partition_point(|&b| b <= position);
    let start = if idx == 0 {
        0
    } else {
        schedule.stage_boundaries[idx - 1]
    };
    Ok((position - start + 1) as u32)
}
