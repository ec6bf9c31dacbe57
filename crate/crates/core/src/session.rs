//! Per-annotator response logs and their append-only JSON-Lines files.
//!
//! File layout: the first line is a header object
//! `{"session_id","annotator_id","schedule_seed"}`, every following line is
//! one [`ResponseRecord`]. Each append is flushed and synced before the call
//! returns, so a crash can only ever leave a partial final line, which is
//! discarded on reload.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// One yes/no answer given at one presentation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub position: usize,
    pub clip_id: String,
    pub answered_repeat: bool,
    #[serde(default)]
    pub reaction_ms: Option<u64>,
    pub fatigue: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Header {
    session_id: String,
    annotator_id: String,
    schedule_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionLog {
    pub session_id: String,
    pub annotator_id: String,
    pub schedule_seed: u64,
    pub responses: Vec<ResponseRecord>,
    pub completed: bool,
}

impl SessionLog {
    pub fn new(session_id: impl Into<String>, annotator_id: impl Into<String>, seed: u64) -> Self {
        SessionLog {
            session_id: session_id.into(),
            annotator_id: annotator_id.into(),
            schedule_seed: seed,
            responses: Vec::new(),
            completed: false,
        }
    }

    /// Appends in memory, rejecting non-increasing positions.
    pub fn push(&mut self, rec: ResponseRecord) -> Result<()> {
        if let Some(last) = self.responses.last() {
            if rec.position <= last.position {
                return Err(CoreError::Order {
                    last: last.position,
                    got: rec.position,
                });
            }
        }
        self.responses.push(rec);
        Ok(())
    }

    /// Response given at `position`, if any.
    pub fn response_at(&self, position: usize) -> Option<&ResponseRecord> {
        self.responses
            .binary_search_by_key(&position, |r| r.position)
            .ok()
            .map(|i| &self.responses[i])
    }

    /// Position the next answer is expected at (0 for an empty log).
    pub fn next_position(&self) -> usize {
        self.responses.last().map_or(0, |r| r.position + 1)
    }

    fn header(&self) -> Header {
        Header {
            session_id: self.session_id.clone(),
            annotator_id: self.annotator_id.clone(),
            schedule_seed: self.schedule_seed,
        }
    }

    /// Serializes to the on-disk JSON-Lines form.
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header()).expect("header serializes");
        out.push('\n');
        for rec in &self.responses {
            out.push_str(&serde_json::to_string(rec).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    /// Parses the JSON-Lines form. A final line that is both unterminated and
    /// unparsable is treated as a torn write and dropped; the returned flag
    /// reports whether that happened.
    pub fn from_jsonl(text: &str) -> Result<(SessionLog, bool)> {
        let mut lines = text.split_inclusive('\n').peekable();
        let header_line = lines
            .next()
            .ok_or_else(|| CoreError::Parse("empty session log".into()))?;
        let header: Header = serde_json::from_str(header_line.trim_end())
            .map_err(|e| CoreError::Parse(format!("session header: {e}")))?;
        let mut log = SessionLog::new(header.session_id, header.annotator_id, header.schedule_seed);
        let mut torn = false;
        let mut line_no = 1;
        while let Some(line) = lines.next() {
            line_no += 1;
            let body = line.trim_end();
            if body.is_empty() {
                continue;
            }
            match serde_json::from_str::<ResponseRecord>(body) {
                Ok(rec) => log.push(rec)?,
                Err(_) if lines.peek().is_none() && !line.ends_with('\n') => torn = true,
                Err(e) => return Err(CoreError::Parse(format!("line {line_no}: {e}"))),
            }
        }
        Ok((log, torn))
    }
}

/// Pure append: returns `log` extended by `rec`.
pub fn append_response(mut log: SessionLog, rec: ResponseRecord) -> Result<SessionLog> {
    log.push(rec)?;
    Ok(log)
}

/// File name used for a session's log inside a log directory.
pub fn log_file_name(session_id: &str) -> String {
    format!("{session_id}.jsonl")
}

fn completion_marker(path: &Path) -> PathBuf {
    path.with_extension("done.json")
}

/// A session log backed by its append-only file. Single writer per file.
#[derive(Debug)]
pub struct SessionLogFile {
    path: PathBuf,
    file: File,
    log: SessionLog,
}

impl SessionLogFile {
    /// Creates `<dir>/<session_id>.jsonl` holding only the header. Fails if the
    /// file already exists.
    pub fn create(dir: &Path, log: SessionLog) -> Result<Self> {
        if !log.responses.is_empty() {
            return Err(CoreError::Validation(
                "new session log must start empty".into(),
            ));
        }
        let path = dir.join(log_file_name(&log.session_id));
        let mut file = OpenOptions::new()
            .create_new(true)
            .append(true)
            .open(&path)
            .map_err(|e| CoreError::io(&path, e))?;
        file.write_all(log.to_jsonl().as_bytes())
            .and_then(|_| file.sync_all())
            .map_err(|e| CoreError::io(&path, e))?;
        Ok(SessionLogFile { path, file, log })
    }

    /// Reopens an existing log for appending, truncating any torn final line.
    pub fn open(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
        let (mut log, torn) = SessionLog::from_jsonl(&text)?;
        if torn {
            let keep = text.rfind('\n').map_or(0, |i| i + 1);
            tracing::warn!(path = %path.display(), "dropping torn final line of session log");
            let f = OpenOptions::new()
                .write(true)
                .open(path)
                .map_err(|e| CoreError::io(path, e))?;
            f.set_len(keep as u64)
                .and_then(|_| f.sync_all())
                .map_err(|e| CoreError::io(path, e))?;
        }
        log.completed = completion_marker(path).exists();
        let file = OpenOptions::new()
            .append(true)
            .open(path)
            .map_err(|e| CoreError::io(path, e))?;
        Ok(SessionLogFile {
            path: path.to_path_buf(),
            file,
            log,
        })
    }

    /// Durably appends one record: returns only after the line is synced.
    pub fn append(&mut self, rec: ResponseRecord) -> Result<()> {
        if self.log.completed {
            return Err(CoreError::Validation(format!(
                "session {:?} is already completed",
                self.log.session_id
            )));
        }
        if let Some(last) = self.log.responses.last() {
            if rec.position <= last.position {
                return Err(CoreError::Order {
                    last: last.position,
                    got: rec.position,
                });
            }
        }
        let mut line = serde_json::to_string(&rec).expect("record serializes");
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.sync_data())
            .map_err(|e| CoreError::io(&self.path, e))?;
        self.log.push(rec)
    }

    /// Marks the session finished by writing a summary next to the log.
    pub fn mark_completed(&mut self, summary: &serde_json::Value) -> Result<()> {
        let marker = completion_marker(&self.path);
        let tmp = marker.with_extension("tmp");
        let body = serde_json::to_vec_pretty(summary).expect("summary serializes");
        std::fs::write(&tmp, body)
            .and_then(|_| std::fs::rename(&tmp, &marker))
            .map_err(|e| CoreError::io(&marker, e))?;
        self.log.completed = true;
        Ok(())
    }

    pub fn log(&self) -> &SessionLog {
        &self.log
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

/// Loads one log file (read-only; a torn tail is ignored, not repaired).
pub fn load_session_log(path: &Path) -> Result<SessionLog> {
    let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
    let (mut log, _) = SessionLog::from_jsonl(&text)?;
    log.completed = completion_marker(path).exists();
    Ok(log)
}

/// Loads every `*.jsonl` log in `dir`, ordered by session id.
pub fn load_session_logs(dir: &Path) -> Result<Vec<SessionLog>> {
    let mut logs = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| CoreError::io(dir, e))? {
        let path = entry.map_err(|e| CoreError::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "jsonl") {
            logs.push(load_session_log(&path)?);
        }
    }
    logs.sort_by(|a, b| a.session_id.cmp(&b.session_id));
    Ok(logs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(position: usize) -> ResponseRecord {
        ResponseRecord {
            position,
            clip_id: format!("c{}", position % 7),
            answered_repeat: position % 3 == 0,
            reaction_ms: (position % 2 == 0).then_some(400 + position as u64),
            fatigue: (position % 135) as u32 + 1,
        }
    }

    #[test]
    fn append_to_empty_log() {
        let log = append_response(SessionLog::new("s", "a", 1), rec(0)).unwrap();
        assert_eq!(log.responses.len(), 1);
    }

    #[test]
    fn duplicate_position_is_order_error() {
        let log = SessionLog::new("s", "a", 1);
        let log = append_response(log, rec(0)).unwrap();
        let log = append_response(log, rec(1)).unwrap();
        let err = append_response(log, rec(1)).unwrap_err();
        assert!(matches!(err, CoreError::Order { last: 1, got: 1 }));
    }

    #[test]
    fn file_round_trip_405_records() {
        let dir = tempfile::tempdir().unwrap();
        let mut f = SessionLogFile::create(dir.path(), SessionLog::new("sess-1", "ann", 7)).unwrap();
        for p in 0..405 {
            f.append(rec(p)).unwrap();
        }
        let path = f.path().to_path_buf();
        drop(f);
        let bytes = std::fs::read_to_string(&path).unwrap();
        let back = load_session_log(&path).unwrap();
        assert_eq!(back.responses.len(), 405);
        assert_eq!(back.to_jsonl(), bytes);
        let mut expected = SessionLog::new("sess-1", "ann", 7);
        for p in 0..405 {
            expected.push(rec(p)).unwrap();
        }
        assert_eq!(back, expected);
    }

    #[test]
    fn torn_tail_is_dropped_and_repaired() {
        let dir = tempfile::tempdir().unwrap();
        let mut f = SessionLogFile::create(dir.path(), SessionLog::new("s", "a", 3)).unwrap();
        f.append(rec(0)).unwrap();
        f.append(rec(1)).unwrap();
        let path = f.path().to_path_buf();
        drop(f);
        let mut raw = OpenOptions::new().append(true).open(&path).unwrap();
        raw.write_all(br#"{"position":2,"clip_id":"c"#).unwrap();
        drop(raw);

        assert_eq!(load_session_log(&path).unwrap().responses.len(), 2);
        let mut reopened = SessionLogFile::open(&path).unwrap();
        assert_eq!(reopened.log().next_position(), 2);
        reopened.append(rec(2)).unwrap();
        let back = load_session_log(&path).unwrap();
        assert_eq!(back.responses.len(), 3);
    }

    #[test]
    fn corrupt_middle_line_is_parse_error() {
        let text = "{\"session_id\":\"s\",\"annotator_id\":\"a\",\"schedule_seed\":1}\nnot json\n{\"position\":1,\"clip_id\":\"x\",\"answered_repeat\":true,\"fatigue\":1}\n";
        assert!(matches!(
            SessionLog::from_jsonl(text).unwrap_err(),
            CoreError::Parse(_)
        ));
    }

    #[test]
    fn completion_marker_sets_completed() {
        let dir = tempfile::tempdir().unwrap();
        let mut f = SessionLogFile::create(dir.path(), SessionLog::new("s", "a", 3)).unwrap();
        f.append(rec(0)).unwrap();
        f.mark_completed(&serde_json::json!({"vigilance_accuracy": 1.0}))
            .unwrap();
        assert!(f.append(rec(1)).is_err());
        let logs = load_session_logs(dir.path()).unwrap();
        assert_eq!(logs.len(), 1);
        assert!(logs[0].completed);
    }

    #[test]
    fn create_refuses_existing_file() {
        let dir = tempfile::tempdir().unwrap();
        SessionLogFile::create(dir.path(), SessionLog::new("s", "a", 3)).unwrap();
        assert!(SessionLogFile::create(dir.path(), SessionLog::new("s", "b", 4)).is_err());
    }
}
