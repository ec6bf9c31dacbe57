//! HTTP service that runs live memory-game sessions.
//!
//! Every answer is appended and fsynced to the session log before it is
//! acknowledged. All session state is rebuilt from the data directory on
//! start, so a killed service resumes where it stopped.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use axum::body::Body;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use memorability_core::{
    fatigue_at, generate_schedule, load_manifest, vigilance_accuracy, CoreError, Manifest,
    MemorabilityTable, ResponseRecord, Schedule, SessionLog, SessionLogFile, VIGILANCE_THRESHOLD,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::cli::ServeArgs;
use crate::commands::{schedule_config, schedule_file_name, score_sessions};
use crate::error::{io, AppError, Result};

pub const INDEX_FILE: &str = "annotators.json";
pub const SESSIONS_DIR: &str = "sessions";

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub seed_base: u64,
    pub break_s: f64,
    pub n_stages: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct BreakMarker {
    /// First position of the stage that follows the break.
    position: usize,
    until_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Running,
    OnBreak(Duration),
    Finished,
}

struct Session {
    schedule: Schedule,
    log: SessionLogFile,
    break_until: Option<(usize, SystemTime)>,
    summary: Option<Value>,
}

fn unix_ms(t: SystemTime) -> u64 {
    t.duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

fn write_atomic(path: &Path, body: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let run = || -> std::io::Result<()> {
        let mut f = std::fs::File::create(&tmp)?;
        std::io::Write::write_all(&mut f, body)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)?;
        if let Some(dir) = path.parent() {
            std::fs::File::open(dir)?.sync_all()?;
        }
        Ok(())
    };
    run().map_err(|e| io(path, e))
}

impl Session {
    fn id(&self) -> &str {
        &self.log.log().session_id
    }

    fn cursor(&self) -> usize {
        self.log.log().next_position()
    }

    fn finished(&self) -> bool {
        self.log.log().completed
    }

    fn dir(&self) -> &Path {
        self.log.path().parent().expect("log lives in a directory")
    }

    fn break_path(&self) -> PathBuf {
        self.dir().join(format!("{}.break.json", self.id()))
    }

    fn phase(&self, now: SystemTime) -> Phase {
        if self.finished() {
            return Phase::Finished;
        }
        match self.break_until {
            Some((pos, until)) if pos == self.cursor() => match until.duration_since(now) {
                Ok(left) if !left.is_zero() => Phase::OnBreak(left),
                _ => Phase::Running,
            },
            _ => Phase::Running,
        }
    }

    fn start_break(&mut self, position: usize, break_s: f64, now: SystemTime) -> Result<()> {
        let until = now + Duration::from_secs_f64(break_s);
        let marker = BreakMarker {
            position,
            until_ms: unix_ms(until),
        };
        write_atomic(&self.break_path(), &serde_json::to_vec(&marker)?)?;
        self.break_until = Some((position, until));
        Ok(())
    }

    fn finish(&mut self) -> Result<()> {
        let acc = vigilance_accuracy(self.log.log(), &self.schedule).ok();
        let summary = json!({
            "vigilance_accuracy": acc,
            "threshold": VIGILANCE_THRESHOLD,
            "passed": acc.map(|a| a >= VIGILANCE_THRESHOLD),
            "n_responses": self.log.log().responses.len(),
        });
        self.log.mark_completed(&summary)?;
        self.summary = Some(summary);
        Ok(())
    }

    /// Reloads a session from its log and schedule files, repairing a torn
    /// log tail and restoring an interrupted break or completion.
    fn open(log_path: &Path, cfg: &ServiceConfig) -> Result<Session> {
        let log = SessionLogFile::open(log_path)?;
        let dir = log_path.parent().expect("log lives in a directory");
        let sched_path = dir.join(schedule_file_name(&log.log().session_id));
        let text = std::fs::read_to_string(&sched_path).map_err(|e| io(&sched_path, e))?;
        let mut s = Session {
            schedule: Schedule::from_json(&text)?,
            log,
            break_until: None,
            summary: None,
        };
        let cursor = s.cursor();
        if s.finished() {
            let done = log_path.with_extension("done.json");
            s.summary = std::fs::read_to_string(&done).ok().and_then(|t| serde_json::from_str(&t).ok());
        } else if cursor >= s.schedule.len() {
            s.finish()?;
        } else if cursor > 0 && s.schedule.stage_boundaries.contains(&cursor) && cfg.break_s > 0.0 {
            let marker: Option<BreakMarker> = std::fs::read_to_string(s.break_path())
                .ok()
                .and_then(|t| serde_json::from_str(&t).ok());
            match marker {
                Some(m) if m.position == cursor => {
                    s.break_until = Some((cursor, UNIX_EPOCH + Duration::from_millis(m.until_ms)));
                }
                // The answer that ended the stage was stored but the break
                // never started; start it now.
                _ => s.start_break(cursor, cfg.break_s, SystemTime::now())?,
            }
        }
        Ok(s)
    }
}

/// Error carried to the client as `{"error": .., "message": ..}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            kind,
            message: message.into(),
        }
    }

    fn not_found(id: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("unknown session {id}"))
    }
}

impl From<AppError> for ApiError {
    fn from(e: AppError) -> Self {
        tracing::error!(error = %e, "request failed");
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.kind(), e.to_string())
    }
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        AppError::from(e).into()
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.kind, "message": self.message }))).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

pub struct AppState {
    cfg: ServiceConfig,
    manifest: Manifest,
    /// content hash → audio file
    clip_files: HashMap<String, PathBuf>,
    /// clip id → content hash
    clip_hashes: HashMap<String, String>,
    sessions: RwLock<BTreeMap<String, Arc<Mutex<Session>>>>,
    /// annotator id → session id; also serializes session creation.
    index: Mutex<BTreeMap<String, String>>,
}

#[derive(Debug, Deserialize)]
pub struct CreateSession {
    pub annotator_id: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Created {
    pub session_id: String,
    pub n_trials: usize,
    pub n_stages: usize,
}

#[derive(Debug, Deserialize)]
pub struct Answer {
    pub position: usize,
    pub answered_repeat: bool,
    #[serde(default)]
    pub reaction_ms: Option<u64>,
}

#[derive(Debug, Serialize)]
pub struct SessionStatus {
    pub session_id: String,
    pub annotator_id: String,
    pub n_trials: usize,
    pub answered: usize,
    pub phase: &'static str,
    pub vigilance_accuracy: Option<f64>,
    pub passed: Option<bool>,
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl AppState {
    /// Hashes every clip and reloads existing sessions from `data_dir`.
    pub fn open(manifest: Manifest, manifest_dir: &Path, cfg: ServiceConfig) -> Result<AppState> {
        let sessions_dir = cfg.data_dir.join(SESSIONS_DIR);
        std::fs::create_dir_all(&sessions_dir).map_err(|e| io(&sessions_dir, e))?;
        let mut clip_files = HashMap::new();
        let mut clip_hashes = HashMap::new();
        for c in manifest.clips() {
            let path = if c.audio_path.is_absolute() {
                c.audio_path.clone()
            } else {
                manifest_dir.join(&c.audio_path)
            };
            let h = sha256_file(&path)?;
            clip_files.insert(h.clone(), path);
            clip_hashes.insert(c.id.clone(), h);
        }
        let index_path = cfg.data_dir.join(INDEX_FILE);
        let mut index: BTreeMap<String, String> = match std::fs::read_to_string(&index_path) {
            Ok(t) => serde_json::from_str(&t)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(io(&index_path, e)),
        };
        let mut sessions = BTreeMap::new();
        for entry in std::fs::read_dir(&sessions_dir).map_err(|e| io(&sessions_dir, e))? {
            let path = entry.map_err(|e| io(&sessions_dir, e))?.path();
            if path.extension().is_some_and(|e| e == "jsonl") {
                let s = Session::open(&path, &cfg)?;
                let log = s.log.log();
                index.entry(log.annotator_id.clone()).or_insert_with(|| log.session_id.clone());
                sessions.insert(log.session_id.clone(), Arc::new(Mutex::new(s)));
            }
        }
        tracing::info!(sessions = sessions.len(), clips = manifest.len(), "state loaded");
        Ok(AppState {
            cfg,
            manifest,
            clip_files,
            clip_hashes,
            sessions: RwLock::new(sessions),
            index: Mutex::new(index),
        })
    }

    fn session(&self, id: &str) -> ApiResult<Arc<Mutex<Session>>> {
        self.sessions
            .read()
            .expect("session map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(id))
    }

    pub fn create_session(&self, annotator_id: &str) -> ApiResult<Created> {
        let annotator_id = annotator_id.trim();
        if annotator_id.is_empty() {
            return Err(ApiError::new(StatusCode::BAD_REQUEST, "validation", "annotator_id must not be empty"));
        }
        let mut index = self.index.lock().expect("index poisoned");
        if let Some(existing) = index.get(annotator_id) {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "duplicate_annotator",
                format!("annotator already has session {existing}"),
            ));
        }
        let seed = self.cfg.seed_base + index.len() as u64;
        let schedule = generate_schedule(
            &self.manifest,
            &schedule_config(seed, self.cfg.n_stages, self.cfg.break_s),
        )?;
        let session_id = uuid::Uuid::new_v4().simple().to_string();
        let dir = self.cfg.data_dir.join(SESSIONS_DIR);
        write_atomic(&dir.join(schedule_file_name(&session_id)), schedule.to_json().as_bytes())?;
        let log = SessionLogFile::create(&dir, SessionLog::new(&session_id, annotator_id, seed))?;
        let mut next = index.clone();
        next.insert(annotator_id.to_string(), session_id.clone());
        write_atomic(&self.cfg.data_dir.join(INDEX_FILE), &serde_json::to_vec_pretty(&next).map_err(AppError::from)?)?;
        *index = next;
        let created = Created {
            session_id: session_id.clone(),
            n_trials: schedule.len(),
            n_stages: schedule.n_stages(),
        };
        let session = Session {
            schedule,
            log,
            break_until: None,
            summary: None,
        };
        self.sessions
            .write()
            .expect("session map poisoned")
            .insert(session_id.clone(), Arc::new(Mutex::new(session)));
        tracing::info!(session = %session_id, seed, "session created");
        Ok(created)
    }

    pub fn next_trial(&self, id: &str) -> ApiResult<Value> {
        let arc = self.session(id)?;
        let s = arc.lock().expect("session poisoned");
        Ok(match s.phase(SystemTime::now()) {
            Phase::Finished => json!({ "finished": true }),
            Phase::OnBreak(left) => json!({
                "break_remaining_s": left.as_secs_f64(),
                "next_stage": s.schedule.presentations[s.cursor()].stage,
            }),
            Phase::Running => {
                let p = &s.schedule.presentations[s.cursor()];
                json!({
                    "position": p.position,
                    "clip_url": format!("/clips/{}", self.clip_hashes[&p.clip_id]),
                    "stage": p.stage,
                    "n_stages": s.schedule.n_stages(),
                    "n_trials": s.schedule.len(),
                })
            }
        })
    }

    pub fn answer(&self, id: &str, a: &Answer) -> ApiResult<()> {
        let arc = self.session(id)?;
        let mut s = arc.lock().expect("session poisoned");
        let now = SystemTime::now();
        match s.phase(now) {
            Phase::Finished => {
                return Err(ApiError::new(StatusCode::GONE, "finished", "session is finished"));
            }
            Phase::OnBreak(left) => {
                return Err(ApiError::new(
                    StatusCode::LOCKED,
                    "on_break",
                    format!("break has {:.1} s left", left.as_secs_f64()),
                ));
            }
            Phase::Running => {}
        }
        let cursor = s.cursor();
        if a.position != cursor {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "not_current",
                format!("position {} is not the current trial {cursor}", a.position),
            ));
        }
        let p = &s.schedule.presentations[cursor];
        let rec = ResponseRecord {
            position: cursor,
            clip_id: p.clip_id.clone(),
            answered_repeat: a.answered_repeat,
            reaction_ms: a.reaction_ms,
            fatigue: fatigue_at(&s.schedule, cursor)?,
        };
        s.log.append(rec)?;
        let next = cursor + 1;
        if next == s.schedule.len() {
            s.finish()?;
        } else if s.schedule.stage_boundaries.contains(&next) && self.cfg.break_s > 0.0 {
            s.start_break(next, self.cfg.break_s, now)?;
        }
        Ok(())
    }

    pub fn statuses(&self) -> Vec<SessionStatus> {
        let sessions: Vec<_> = self.sessions.read().expect("session map poisoned").values().cloned().collect();
        let now = SystemTime::now();
        sessions
            .iter()
            .map(|arc| {
                let s = arc.lock().expect("session poisoned");
                let log = s.log.log();
                let acc = match &s.summary {
                    Some(v) => v["vigilance_accuracy"].as_f64(),
                    None => vigilance_accuracy(log, &s.schedule).ok(),
                };
                SessionStatus {
                    session_id: log.session_id.clone(),
                    annotator_id: log.annotator_id.clone(),
                    n_trials: s.schedule.len(),
                    answered: log.responses.len(),
                    phase: match s.phase(now) {
                        Phase::Running => "running",
                        Phase::OnBreak(_) => "break",
                        Phase::Finished => "finished",
                    },
                    vigilance_accuracy: acc,
                    passed: acc.map(|a| a >= VIGILANCE_THRESHOLD),
                }
            })
            .collect()
    }

    /// Scores over every stored session that passes the vigilance gate.
    pub fn memorability_csv(&self) -> ApiResult<String> {
        let sessions: Vec<_> = self.sessions.read().expect("session map poisoned").values().cloned().collect();
        let (logs, schedules): (Vec<SessionLog>, Vec<Schedule>) = sessions
            .iter()
            .map(|arc| {
                let s = arc.lock().expect("session poisoned");
                (s.log.log().clone(), s.schedule.clone())
            })
            .unzip();
        match score_sessions(&logs, &schedules, VIGILANCE_THRESHOLD) {
            Ok(o) => Ok(o.table.to_csv_string()),
            Err(AppError::Core(CoreError::NoData)) => Ok(MemorabilityTable::default().to_csv_string()),
            Err(e) => Err(e.into()),
        }
    }

    pub fn clip_path(&self, hash: &str) -> Option<&Path> {
        self.clip_files.get(hash).map(PathBuf::as_path)
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

async fn create(State(st): State<Arc<AppState>>, Json(req): Json<CreateSession>) -> ApiResult<(StatusCode, Json<Created>)> {
    let created = blocking(move || st.create_session(&req.annotator_id)).await?;
    Ok((StatusCode::CREATED, Json(created)))
}

async fn next(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    Ok(Json(blocking(move || st.next_trial(&id)).await?))
}

async fn answer(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(a): Json<Answer>,
) -> ApiResult<StatusCode> {
    blocking(move || st.answer(&id, &a)).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn admin_sessions(State(st): State<Arc<AppState>>) -> ApiResult<Json<Vec<SessionStatus>>> {
    Ok(Json(blocking(move || Ok(st.statuses())).await?))
}

async fn admin_memorability(State(st): State<Arc<AppState>>) -> ApiResult<Response> {
    let csv = blocking(move || st.memorability_csv()).await?;
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv).into_response())
}

async fn clip(State(st): State<Arc<AppState>>, UrlPath(hash): UrlPath<String>, headers: HeaderMap) -> ApiResult<Response> {
    let Some(path) = st.clip_path(&hash).map(Path::to_path_buf) else {
        return Err(ApiError::new(StatusCode::NOT_FOUND, "not_found", "unknown clip"));
    };
    let etag = format!("\"{hash}\"");
    let cache = "public, max-age=31536000, immutable";
    if headers
        .get(header::IF_NONE_MATCH)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.split(',').any(|t| t.trim() == etag || t.trim() == "*"))
    {
        return Ok((StatusCode::NOT_MODIFIED, [(header::ETAG, etag), (header::CACHE_CONTROL, cache.to_string())]).into_response());
    }
    let bytes = tokio::fs::read(&path)
        .await
        .map_err(|e| ApiError::from(io(&path, e)))?;
    Ok(Response::builder()
        .header(header::CONTENT_TYPE, "audio/wav")
        .header(header::ETAG, etag)
        .header(header::CACHE_CONTROL, cache)
        .body(Body::from(bytes))
        .expect("static headers are valid"))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/sessions", post(create))
        .route("/api/sessions/{id}/next", get(next))
        .route("/api/sessions/{id}/answers", post(answer))
        .route("/api/admin/sessions", get(admin_sessions))
        .route("/api/admin/memorability", get(admin_memorability))
        .route("/clips/{hash}", get(clip))
        .with_state(state)
}

pub fn serve(args: &ServeArgs) -> Result<()> {
    if !(args.break_s.is_finite() && args.break_s >= 0.0) {
        return Err(AppError::Invalid("--break-s must be non-negative".into()));
    }
    let manifest = load_manifest(&args.manifest)?;
    let dir = args.manifest.parent().map(Path::to_path_buf).unwrap_or_default();
    let cfg = ServiceConfig {
        data_dir: args.data_dir.clone(),
        seed_base: args.seed_base,
        break_s: args.break_s,
        n_stages: args.n_stages,
    };
    // fail early on a manifest the scheduler cannot satisfy
    generate_schedule(&manifest, &schedule_config(args.seed_base, args.n_stages, args.break_s))?;
    let state = Arc::new(AppState::open(manifest, &dir, cfg)?);
    let rt = tokio::runtime::Runtime::new().map_err(|e| io("<runtime>", e))?;
    rt.block_on(async move {
        let addr = format!("{}:{}", args.host, args.port);
        let listener = tokio::net::TcpListener::bind(&addr).await.map_err(|e| io(&addr, e))?;
        let local = listener.local_addr().map_err(|e| io(&addr, e))?;
        println!("{}", json!({ "listening": local.to_string() }));
        tracing::info!(%local, "serving");
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| io(&addr, e))
    })
}
