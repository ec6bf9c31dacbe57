//! Core of the music memory game: clip catalogue, session logs, trial
//! scheduling and memorability scoring.

pub mod error;
pub mod scheduler;
pub mod scoring;
pub mod session;
pub mod stats;
pub mod types;

pub use error::{CoreError, Result};
pub use scheduler::{
    fatigue_at, generate_schedule, interval_of, Presentation, Schedule, ScheduleConfig,
};
pub use scoring::{
    cross_condition_correlation, filter_sessions, fit_interval_fatigue_model,
    interval_fatigue_summary, memorability_scores, split_half_consistency, vigilance_accuracy,
    ClipTally, FilterReport, IntervalFatigueFit, MemorabilityTable, SplitHalfReport,
    VIGILANCE_THRESHOLD,
};
pub use session::{
    append_response, load_session_log, load_session_logs, ResponseRecord, SessionLog,
    SessionLogFile,
};
pub use stats::{average_ranks, spearman, RankCorrelation};
pub use types::{load_manifest, AudioClip, Manifest, TaskType, CLIP_SECONDS};
