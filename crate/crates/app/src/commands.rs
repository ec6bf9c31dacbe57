//! Subcommand implementations. Each returns what it wrote so tests can
//! compare against direct library calls.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use memorability_core::{
    filter_sessions, generate_schedule, load_manifest, load_session_logs, memorability_scores, FilterReport,
    Manifest, MemorabilityTable, Schedule, ScheduleConfig, SessionLog,
};
use memorability_features::{
    augment_batch, base_names, extract_batch, feature_names, load_inputs, read_mood_dataset, train_mood_model,
    AugmentedTable, FeatureTable, MoodModel, SourceDirs,
};
use memorability_learn::{
    fit_pipeline, kernel_shap, kfold_evaluate, shap_summary, Augmenter, EvalConfig, EvalReport, MlpConfig,
    ModelSpec, ShapSummary, SvrConfig, TrainedPipeline,
};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cli::{
    AugmentArgs, EvaluateArgs, ExplainArgs, ExtractArgs, ModelKind, ScheduleArgs, ScoreArgs, SourceArgs, TrainArgs,
};
use crate::error::{io, AppError, Result};

pub fn schedule_file_name(session_id: &str) -> String {
    format!("{session_id}.schedule.json")
}

/// Writes to `path`, or stdout when absent.
pub fn emit(path: Option<&Path>, body: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, body).map_err(|e| io(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(body.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| io("<stdout>", e))
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| io(path, e))
}

fn manifest_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

pub fn schedule_config(seed: u64, n_stages: usize, break_s: f64) -> ScheduleConfig {
    ScheduleConfig {
        seed,
        n_stages,
        break_s,
        ..Default::default()
    }
}

pub fn schedule(args: &ScheduleArgs) -> Result<Schedule> {
    let manifest = load_manifest(&args.manifest)?;
    let s = generate_schedule(&manifest, &schedule_config(args.seed, args.n_stages, args.break_s))?;
    emit(args.out.as_deref(), &(s.to_json() + "\n"))?;
    Ok(s)
}

pub struct ScoreOutcome {
    pub table: MemorabilityTable,
    pub report: FilterReport,
    pub session_ids: Vec<String>,
}

/// Pairs every log with `<schedules>/<session_id>.schedule.json`.
pub fn load_logs_with_schedules(logs_dir: &Path, schedules_dir: &Path) -> Result<(Vec<SessionLog>, Vec<Schedule>)> {
    let logs = load_session_logs(logs_dir)?;
    let schedules = logs
        .iter()
        .map(|l| {
            let p = schedules_dir.join(schedule_file_name(&l.session_id));
            Ok(Schedule::from_json(&read(&p)?)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((logs, schedules))
}

/// Vigilance gate then scoring over the surviving sessions.
pub fn score_sessions(logs: &[SessionLog], schedules: &[Schedule], threshold: f64) -> Result<ScoreOutcome> {
    let report = filter_sessions(logs, schedules, threshold)?;
    let kept_logs = report.select(logs);
    let table = memorability_scores(&kept_logs, &report.select(schedules))?;
    Ok(ScoreOutcome {
        table,
        session_ids: kept_logs.into_iter().map(|l| l.session_id).collect(),
        report,
    })
}

pub fn score(args: &ScoreArgs) -> Result<ScoreOutcome> {
    let (logs, schedules) = load_logs_with_schedules(&args.logs, &args.schedules)?;
    let outcome = score_sessions(&logs, &schedules, args.threshold)?;
    tracing::info!(
        sessions = logs.len(),
        kept = outcome.report.kept.len(),
        below_threshold = outcome.report.rejected_low.len(),
        incomplete = outcome.report.rejected_incomplete.len(),
        clips = outcome.table.len(),
        "scored"
    );
    emit(args.out.as_deref(), &outcome.table.to_csv_string())?;
    Ok(outcome)
}

fn load_sources(src: &SourceArgs) -> Result<(Manifest, Vec<memorability_features::ClipInput>, Option<MoodModel>)> {
    let manifest = load_manifest(&src.manifest)?;
    let dirs = SourceDirs {
        stems: src.stems.clone(),
        tags: src.tags.clone(),
        allow_default_tags: src.allow_default_tags,
    };
    let inputs = load_inputs(manifest.clips(), &manifest_dir(&src.manifest), &dirs)?;
    let mood = match (&src.mood, src.base_only) {
        (Some(p), false) => Some(MoodModel::load(p)?),
        (None, true) => None,
        _ => return Err(AppError::Invalid("give exactly one of --mood and --base-only".into())),
    };
    if let Some(m) = &mood {
        if m.input_names.len() != base_names().len() {
            return Err(AppError::Invalid(format!(
                "mood model takes {} inputs, the feature pipeline provides {}",
                m.input_names.len(),
                base_names().len()
            )));
        }
    }
    Ok((manifest, inputs, mood))
}

fn column_names(mood: Option<&MoodModel>) -> Vec<String> {
    match mood {
        Some(_) => feature_names(),
        None => base_names().iter().map(|s| s.to_string()).collect(),
    }
}

pub fn extract(args: &ExtractArgs) -> Result<FeatureTable> {
    let (_, inputs, mood) = load_sources(&args.source)?;
    let mut table = FeatureTable::new(column_names(mood.as_ref()));
    for (input, row) in inputs.iter().zip(extract_batch(&inputs, mood.as_ref())) {
        table.push(&input.clip_id, row?)?;
    }
    emit(args.out.as_deref(), &table.to_csv_string())?;
    Ok(table)
}

pub fn augment(args: &AugmentArgs) -> Result<AugmentedTable> {
    let (_, inputs, mood) = load_sources(&args.source)?;
    let mut rows = Vec::new();
    for r in augment_batch(&inputs, mood.as_ref(), args.seed) {
        rows.extend(r?);
    }
    let table = AugmentedTable {
        names: column_names(mood.as_ref()),
        rows,
    };
    let mut buf = Vec::new();
    table.write_csv(&mut buf).map_err(AppError::from)?;
    emit(args.out.as_deref(), &String::from_utf8(buf).expect("csv is utf-8"))?;
    Ok(table)
}

pub fn model_spec(kind: ModelKind, seed: u64) -> ModelSpec {
    match kind {
        ModelKind::Svr => ModelSpec::Svr(SvrConfig::default()),
        ModelKind::SvrLinear => ModelSpec::Svr(SvrConfig::linear()),
        ModelKind::Mlp => ModelSpec::Mlp(MlpConfig {
            seed,
            ..Default::default()
        }),
    }
}

/// Feature rows joined with their labels, plus augmented rows if given.
pub fn labelled_features(
    features: &Path,
    labels: &Path,
    augmented: Option<&Path>,
) -> Result<(FeatureTable, Vec<f64>, Option<memorability_learn::PrecomputedAugmenter>)> {
    let table = FeatureTable::read_csv(read(features)?.as_bytes())?;
    let scores: BTreeMap<String, f64> = MemorabilityTable::read_scores_csv(read(labels)?.as_bytes())?;
    let (joined, y) = table.join_labels(&scores)?;
    let aug = match augmented {
        Some(p) => Some(joined.augmenter(&AugmentedTable::read_csv(read(p)?.as_bytes())?)?),
        None => None,
    };
    Ok((joined, y, aug))
}

pub enum Trained {
    Mood(MoodModel),
    Pipeline(TrainedPipeline),
}

pub fn train(args: &TrainArgs) -> Result<Trained> {
    if let Some(path) = &args.mood_dataset {
        let (names, rows) = read_mood_dataset(read(path)?.as_bytes())?;
        let model = train_mood_model(&rows, &names)?;
        model.save(&args.out)?;
        return Ok(Trained::Mood(model));
    }
    let (Some(features), Some(labels)) = (&args.features, &args.labels) else {
        return Err(AppError::Invalid("train needs --mood-dataset or --features with --labels".into()));
    };
    let (table, y, aug) = labelled_features(features, labels, args.augmented.as_deref())?;
    let rows: Vec<usize> = (0..table.len()).collect();
    let (mut pipe, _) = fit_pipeline(
        &table.rows,
        &y,
        &rows,
        &model_spec(args.model, args.seed),
        args.k,
        aug.as_ref().map(|a| a as &dyn Augmenter),
    )?;
    pipe.feature_names = table.names.clone();
    std::fs::write(&args.out, pipe.to_json()?).map_err(|e| io(&args.out, e))?;
    Ok(Trained::Pipeline(pipe))
}

pub fn evaluate(args: &EvaluateArgs) -> Result<EvalReport> {
    let (table, y, aug) = labelled_features(&args.features, &args.labels, args.augmented.as_deref())?;
    let cfg = EvalConfig {
        model: model_spec(args.model, args.seed),
        k_select: args.k,
        folds: args.folds,
        seed: args.seed,
    };
    let report = kfold_evaluate(&table.rows, &y, &cfg, aug.as_ref().map(|a| a as &dyn Augmenter))?;
    tracing::info!(mean_spearman = report.mean_spearman, mean_mse = report.mean_mse, "evaluated");
    emit(args.out.as_deref(), &report.to_csv())?;
    Ok(report)
}

fn subsample(n: usize, k: usize, seed: u64) -> Vec<usize> {
    if k >= n {
        return (0..n).collect();
    }
    let mut idx = sample(&mut ChaCha8Rng::seed_from_u64(seed), n, k).into_vec();
    idx.sort_unstable();
    idx
}

/// Attributions in the selected-feature space, reported under the original
/// feature names. Standardization happens inside the model, and SHAP values
/// do not change under a per-feature affine map, so raw values are used.
pub fn explain_pipeline(
    pipe: &TrainedPipeline,
    table: &FeatureTable,
    background: usize,
    coalitions: usize,
    max_instances: Option<usize>,
    seed: u64,
) -> Result<ShapSummary> {
    if table.names != pipe.feature_names {
        return Err(AppError::Invalid(
            "feature table columns differ from the ones the model was trained on".into(),
        ));
    }
    let project = |r: &Vec<f64>| -> Vec<f64> { pipe.selected.iter().map(|&j| r[j]).collect() };
    let rows: Vec<Vec<f64>> = table.rows.iter().map(project).collect();
    if rows.is_empty() {
        return Err(AppError::Invalid("feature table is empty".into()));
    }
    let bg: Vec<Vec<f64>> = subsample(rows.len(), background.max(1), seed)
        .into_iter()
        .map(|i| rows[i].clone())
        .collect();
    let instances = subsample(rows.len(), max_instances.unwrap_or(rows.len()), seed.wrapping_add(1));
    let f = |z: &[f64]| pipe.labels.denormalize(pipe.model.predict_row(z));
    let mut explanations = Vec::with_capacity(instances.len());
    let mut values = Vec::with_capacity(instances.len());
    for (n, &i) in instances.iter().enumerate() {
        explanations.push(kernel_shap(&f, &rows[i], &bg, coalitions, seed.wrapping_add(n as u64))?);
        values.push(rows[i].clone());
    }
    Ok(shap_summary(&explanations, &values, &pipe.selected_names())?)
}

pub fn explain(args: &ExplainArgs) -> Result<ShapSummary> {
    let pipe = TrainedPipeline::from_json(&read(&args.model)?)?;
    let table = FeatureTable::read_csv(read(&args.features)?.as_bytes())?;
    let summary = explain_pipeline(
        &pipe,
        &table,
        args.background,
        args.coalitions,
        args.max_instances,
        args.seed,
    )?;
    if let Some(p) = &args.ranking {
        std::fs::write(p, summary.ranking_csv()).map_err(|e| io(p, e))?;
    }
    emit(args.out.as_deref(), &summary.to_csv())?;
    Ok(summary)
}
