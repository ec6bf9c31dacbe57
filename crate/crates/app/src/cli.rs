use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "memorability", version, about = "Music memorability lab: memory-game sessions, scoring, features and models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a trial schedule for a manifest
    Schedule(ScheduleArgs),
    /// Gate sessions on vigilance and compute per-clip memorability
    Score(ScoreArgs),
    /// Extract the 40 handcrafted features for every clip of a manifest
    Extract(ExtractArgs),
    /// Train a mood model or a memorability pipeline
    Train(TrainArgs),
    /// K-fold evaluation of a memorability model
    Evaluate(EvaluateArgs),
    /// SHAP attributions for a trained pipeline
    Explain(ExplainArgs),
    /// Feature rows of augmented copies of every clip
    Augment(AugmentArgs),
    /// Run the memory-game HTTP service
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 3)]
    pub n_stages: usize,
    #[arg(long, default_value_t = 180.0)]
    pub break_s: f64,
    /// Write here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Directory of `<session_id>.jsonl` logs
    #[arg(long)]
    pub logs: PathBuf,
    /// Directory of `<session_id>.schedule.json` files
    #[arg(long)]
    pub schedules: PathBuf,
    #[arg(long, default_value_t = memorability_core::VIGILANCE_THRESHOLD)]
    pub threshold: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SourceArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory holding `<clip_id>/{vocals,bass,drums,other}.wav`
    #[arg(long)]
    pub stems: Option<PathBuf>,
    /// Directory holding `<clip_id>.tags.json`
    #[arg(long)]
    pub tags: Option<PathBuf>,
    /// Use (1.0, 1.0) when a tag sidecar is missing
    #[arg(long)]
    pub allow_default_tags: bool,
    /// Mood model JSON from `train --mood-dataset`
    #[arg(long, required_unless_present = "base_only")]
    pub mood: Option<PathBuf>,
    /// Emit the 38 mood-model inputs instead of the full vector
    #[arg(long, conflicts_with = "mood")]
    pub base_only: bool,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    /// RBF-kernel epsilon-SVR
    Svr,
    /// Linear-kernel epsilon-SVR
    SvrLinear,
    /// [k, 64, 16, 1] ReLU network
    Mlp,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Emotion dataset CSV (valence, arousal, inputs); trains a mood model
    #[arg(long, conflicts_with_all = ["features", "labels"])]
    pub mood_dataset: Option<PathBuf>,
    #[arg(long, requires = "labels", required_unless_present = "mood_dataset")]
    pub features: Option<PathBuf>,
    /// Memorability CSV from `score`
    #[arg(long, requires = "features")]
    pub labels: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModelKind::Svr)]
    pub model: ModelKind,
    /// Keep the k most relevant features (all when omitted)
    #[arg(long)]
    pub k: Option<usize>,
    /// Augmented rows from `augment`, added to the training set
    #[arg(long)]
    pub augmented: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, value_enum, default_value_t = ModelKind::Svr)]
    pub model: ModelKind,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long)]
    pub augmented: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    /// Pipeline JSON from `train --features`
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    /// Background rows drawn from the feature table
    #[arg(long, default_value_t = 100)]
    pub background: usize,
    /// Coalition budget when more than 12 features are selected
    #[arg(long, default_value_t = 2048)]
    pub coalitions: usize,
    /// Explain at most this many rows (all when omitted)
    #[arg(long)]
    pub max_instances: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Long-format (feature, sample_index, feature_value, phi) CSV
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Ranking CSV (feature, mean |phi|, direction)
    #[arg(long)]
    pub ranking: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long)]
    pub data_dir: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Session n gets schedule seed `seed_base + n`
    #[arg(long, default_value_t = 0)]
    pub seed_base: u64,
    #[arg(long, default_value_t = 180.0)]
    pub break_s: f64,
    #[arg(long, default_value_t = 3)]
    pub n_stages: usize,
}
