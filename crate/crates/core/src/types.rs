//! Clip catalogue types and the experiment manifest.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Canonical clip length in seconds.
pub const CLIP_SECONDS: f64 = 5.0;
/// Allowed deviation from [`CLIP_SECONDS`] after resampling and stretching.
pub const CLIP_TOLERANCE_S: f64 = 0.05;

/// Role a clip plays in the memory game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskType {
    Filler,
    Vigilance,
    TargetShort,
    TargetMedium,
    TargetLong,
}

impl TaskType {
    pub const ALL: [TaskType; 5] = [
        TaskType::Filler,
        TaskType::Vigilance,
        TaskType::TargetShort,
        TaskType::TargetMedium,
        TaskType::TargetLong,
    ];

    /// Stable serialized name.
    pub fn as_str(self) -> &'static str {
        match self {
            TaskType::Filler => "filler",
            TaskType::Vigilance => "vigilance",
            TaskType::TargetShort => "target_short",
            TaskType::TargetMedium => "target_medium",
            TaskType::TargetLong => "target_long",
        }
    }

    /// Vigilance and target clips are heard twice, fillers once.
    pub fn is_repeated(self) -> bool {
        !matches!(self, TaskType::Filler)
    }

    pub fn is_target(self) -> bool {
        matches!(
            self,
            TaskType::TargetShort | TaskType::TargetMedium | TaskType::TargetLong
        )
    }
}

impl fmt::Display for TaskType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TaskType {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        TaskType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| CoreError::Validation(format!("unknown task type {s:?}")))
    }
}

/// A catalogued five-second excerpt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioClip {
    pub id: String,
    pub audio_path: PathBuf,
    pub duration_s: f64,
    pub task_type: TaskType,
    #[serde(default)]
    pub source_location: Option<String>,
    #[serde(default)]
    pub source_views: Option<u64>,
}

impl AudioClip {
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(CoreError::Validation("clip id must not be empty".into()));
        }
        if !self.duration_s.is_finite()
            || (self.duration_s - CLIP_SECONDS).abs() > CLIP_TOLERANCE_S + 1e-12
        {
            return Err(CoreError::Validation(format!(
                "clip {:?} has duration {} s, expected {CLIP_SECONDS} ± {CLIP_TOLERANCE_S}",
                self.id, self.duration_s
            )));
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct ManifestFile {
    clips: Vec<AudioClip>,
}

#[derive(Serialize)]
struct ManifestFileRef<'a> {
    clips: &'a [AudioClip],
}

/// Validated clip list with per-task counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    clips: Vec<AudioClip>,
    counts_by_task: BTreeMap<TaskType, usize>,
}

impl Manifest {
    /// Counts per task type used by the standard experiment (235 clips).
    pub const DEFAULT_COUNTS: [(TaskType, usize); 5] = [
        (TaskType::Filler, 65),
        (TaskType::Vigilance, 21),
        (TaskType::TargetShort, 88),
        (TaskType::TargetMedium, 41),
        (TaskType::TargetLong, 20),
    ];

    pub fn new(clips: Vec<AudioClip>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(clips.len());
        for clip in &clips {
            clip.validate()?;
            if !seen.insert(clip.id.as_str()) {
                return Err(CoreError::Validation(format!(
                    "duplicate clip id {:?}",
                    clip.id
                )));
            }
        }
        let mut counts_by_task: BTreeMap<TaskType, usize> =
            TaskType::ALL.iter().map(|&t| (t, 0)).collect();
        for clip in &clips {
            *counts_by_task.entry(clip.task_type).or_default() += 1;
        }
        Ok(Manifest {
            clips,
            counts_by_task,
        })
    }

    /// Builds a manifest with the given per-task counts. Clip ids are
    /// `<task>_<nnn>` and audio paths point into `audio_dir`.
    pub fn with_counts(counts: &[(TaskType, usize)], audio_dir: &Path) -> Self {
        let clips = counts
            .iter()
            .flat_map(|&(task, n)| {
                (0..n).map(move |i| {
                    let id = format!("{}_{:03}", task.as_str(), i);
                    AudioClip {
                        audio_path: audio_dir.join(format!("{id}.wav")),
                        id,
                        duration_s: CLIP_SECONDS,
                        task_type: task,
                        source_location: None,
                        source_views: None,
                    }
                })
            })
            .collect();
        Manifest::new(clips).expect("generated manifest is valid")
    }

    pub fn clips(&self) -> &[AudioClip] {
        &self.clips
    }

    pub fn clip(&self, id: &str) -> Option<&AudioClip> {
        self.clips.iter().find(|c| c.id == id)
    }

    pub fn counts_by_task(&self) -> &BTreeMap<TaskType, usize> {
        &self.counts_by_task
    }

    pub fn count(&self, task: TaskType) -> usize {
        self.counts_by_task.get(&task).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ManifestFile =
            serde_json::from_str(text).map_err(|e| CoreError::Parse(e.to_string()))?;
        Manifest::new(file.clips)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ManifestFileRef { clips: &self.clips })
            .expect("manifest serializes")
    }
}

/// Reads and validates a manifest JSON document.
///
/// Relative audio paths are resolved against the manifest's directory.
pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
    let manifest = Manifest::from_json(&text)?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    let clips = manifest
        .clips
        .into_iter()
        .map(|mut c| {
            if c.audio_path.is_relative() {
                c.audio_path = base.join(&c.audio_path);
            }
            c
        })
        .collect();
    Manifest::new(clips)
}
