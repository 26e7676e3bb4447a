//! Append-only JSON-lines event log with a sidecar snapshot.
//!
//! Every line is one JSON object, `seq` first, terminated by a CRC-32 of the
//! preceding bytes:
//!
//! ```text
//! {"seq":7,"ts":"2026-01-01T00:00:00Z","kind":"job_submitted","payload":{...},"crc":"1c291ca3"}
//! ```
//!
//! Appends are fsynced before the sequence number is returned. On open, the
//! log is scanned up to the first line that fails to parse or whose checksum
//! does not match; everything from there on is cut off and reported.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::marker::PhantomData;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("storage failure: {0}")]
    Storage(#[from] std::io::Error),
    #[error("corrupt log at seq {seq}: {reason}")]
    CorruptLog { seq: u64, reason: String },
}

/// State that can be rebuilt by folding events in order.
pub trait Replayable: Default + Clone + Serialize + DeserializeOwned {
    type Event: Serialize + DeserializeOwned + Clone;

    fn apply(&mut self, seq: u64, ts: DateTime<Utc>, event: &Self::Event);
}

/// One decoded log entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Stored<E> {
    pub seq: u64,
    pub ts: DateTime<Utc>,
    pub event: E,
}

/// What was cut off the tail while opening a log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Truncation {
    /// Sequence number the first discarded line should have carried.
    pub seq: u64,
    pub dropped_lines: usize,
    pub reason: String,
}

#[derive(Serialize, Deserialize)]
struct Line {
    seq: u64,
    ts: DateTime<Utc>,
    kind: String,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    payload: serde_json::Value,
}

fn encode<E: Serialize>(seq: u64, ts: DateTime<Utc>, event: &E) -> Result<String, StoreError> {
    let tagged = serde_json::to_value(event).map_err(|e| StoreError::SchemaViolation(e.to_string()))?;
    let (kind, payload) = split_tagged(tagged)?;
    let body = serde_json::to_string(&Line { seq, ts, kind, payload })
        .map_err(|e| StoreError::SchemaViolation(e.to_string()))?;
    let body = &body[..body.len() - 1];
    Ok(format!("{body},\"crc\":\"{:08x}\"}}", crc32fast::hash(body.as_bytes())))
}

fn split_tagged(v: serde_json::Value) -> Result<(String, serde_json::Value), StoreError> {
    match v {
        serde_json::Value::Object(mut m) => {
            let kind = match m.remove("kind") {
                Some(serde_json::Value::String(k)) => k,
                _ => return Err(StoreError::SchemaViolation("event has no `kind` tag".into())),
            };
            Ok((kind, m.remove("payload").unwrap_or(serde_json::Value::Null)))
        }
        serde_json::Value::String(kind) => Ok((kind, serde_json::Value::Null)),
        _ => Err(StoreError::SchemaViolation("events must serialize with a kind tag".into())),
    }
}

fn decode_event<E: DeserializeOwned>(kind: &str, payload: serde_json::Value) -> Result<E, StoreError> {
    let mut obj = serde_json::Map::new();
    obj.insert("kind".into(), serde_json::Value::String(kind.to_string()));
    if !payload.is_null() {
        obj.insert("payload".into(), payload);
    }
    serde_json::from_value(serde_json::Value::Object(obj)).map_err(|e| StoreError::SchemaViolation(e.to_string()))
}

fn decode<E: DeserializeOwned>(line: &str, expect_seq: u64) -> Result<Stored<E>, String> {
    let line = line.strip_suffix('\r').unwrap_or(line);
    let Some(cut) = line.rfind(",\"crc\":\"") else {
        return Err("missing checksum".into());
    };
    let (body, tail) = line.split_at(cut);
    let crc_hex = tail
        .strip_prefix(",\"crc\":\"")
        .and_then(|t| t.strip_suffix("\"}"))
        .ok_or("malformed checksum field")?;
    let want = u32::from_str_radix(crc_hex, 16).map_err(|_| "malformed checksum value")?;
    if crc32fast::hash(body.as_bytes()) != want {
        return Err("checksum mismatch".into());
    }
    let parsed: Line = serde_json::from_str(&format!("{body}}}")).map_err(|e| e.to_string())?;
    if parsed.seq != expect_seq {
        return Err(format!("expected seq {expect_seq}, found {}", parsed.seq));
    }
    let event = decode_event(&parsed.kind, parsed.payload).map_err(|e| e.to_string())?;
    Ok(Stored {
        seq: parsed.seq,
        ts: parsed.ts,
        event,
    })
}

/// Decodes lines until the first invalid one.
fn scan<E: DeserializeOwned>(lines: &[String]) -> (Vec<Stored<E>>, Option<Truncation>) {
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        let seq = i as u64 + 1;
        match decode(line, seq) {
            Ok(s) => out.push(s),
            Err(reason) => {
                return (
                    out,
                    Some(Truncation {
                        seq,
                        dropped_lines: lines.len() - i,
                        reason,
                    }),
                )
            }
        }
    }
    (out, None)
}

enum Sink {
    Memory { lines: Vec<String>, snapshot: Option<String> },
    File { file: File, path: PathBuf },
}

/// Single-writer event log over a file or an in-memory buffer.
pub struct EventLog<E> {
    sink: Sink,
    events: Vec<Stored<E>>,
    truncation: Option<Truncation>,
    _marker: PhantomData<E>,
}

impl<E> std::fmt::Debug for EventLog<E> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EventLog")
            .field("last_seq", &self.events.len())
            .field("truncation", &self.truncation)
            .finish_non_exhaustive()
    }
}

impl<E: Serialize + DeserializeOwned + Clone> EventLog<E> {
    pub fn in_memory() -> Self {
        EventLog {
            sink: Sink::Memory {
                lines: Vec::new(),
                snapshot: None,
            },
            events: Vec::new(),
            truncation: None,
            _marker: PhantomData,
        }
    }

    /// Memory log seeded with raw lines, as if read from disk.
    pub fn from_lines(lines: Vec<String>) -> Self {
        let (events, truncation) = scan(&lines);
        let kept = lines[..events.len()].to_vec();
        EventLog {
            sink: Sink::Memory {
                lines: kept,
                snapshot: None,
            },
            events,
            truncation,
            _marker: PhantomData,
        }
    }

    /// Opens (or creates) a log file, cutting off any invalid tail.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut file = OpenOptions::new().read(true).create(true).append(true).open(&path)?;
        let mut lines = Vec::new();
        let mut offsets = vec![0u64];
        {
            let mut reader = BufReader::new(&file);
            let mut buf = Vec::new();
            let mut pos = 0u64;
            loop {
                buf.clear();
                let n = reader.read_until(b'\n', &mut buf)?;
                if n == 0 {
                    break;
                }
                pos += n as u64;
                let complete = buf.last() == Some(&b'\n');
                let text = String::from_utf8_lossy(if complete { &buf[..n - 1] } else { &buf[..] }).into_owned();
                // an unterminated final line was never acknowledged
                lines.push(if complete { text } else { String::new() });
                offsets.push(pos);
            }
        }
        let (events, truncation) = scan::<E>(&lines);
        if let Some(t) = &truncation {
            let keep = offsets[events.len()];
            tracing::warn!(path = %path.display(), seq = t.seq, dropped = t.dropped_lines, reason = %t.reason, "truncating event log");
            file.set_len(keep)?;
            file.sync_all()?;
        }
        file.seek(SeekFrom::End(0))?;
        Ok(EventLog {
            sink: Sink::File { file, path },
            events,
            truncation,
            _marker: PhantomData,
        })
    }

    pub fn last_seq(&self) -> u64 {
        self.events.len() as u64
    }

    /// Tail that was discarded when the log was opened, if any.
    pub fn truncation(&self) -> Option<&Truncation> {
        self.truncation.as_ref()
    }

    pub fn events(&self) -> &[Stored<E>] {
        &self.events
    }

    /// Events with `seq > after`.
    pub fn since(&self, after: u64) -> &[Stored<E>] {
        &self.events[(after as usize).min(self.events.len())..]
    }

    /// Durably appends one event and returns its sequence number.
    pub fn append(&mut self, ts: DateTime<Utc>, event: E) -> Result<u64, StoreError> {
        let seq = self.last_seq() + 1;
        let line = encode(seq, ts, &event)?;
        match &mut self.sink {
            Sink::Memory { lines, .. } => lines.push(line),
            Sink::File { file, .. } => {
                file.write_all(line.as_bytes())?;
                file.write_all(b"\n")?;
                file.sync_data()?;
            }
        }
        self.events.push(Stored { seq, ts, event });
        Ok(seq)
    }

    /// Appends an event given as `kind` plus an untyped payload, validating
    /// it against the event schema first.
    pub fn append_raw(&mut self, ts: DateTime<Utc>, kind: &str, payload: serde_json::Value) -> Result<u64, StoreError> {
        let event: E = decode_event(kind, payload)?;
        self.append(ts, event)
    }

    /// The raw lines currently in the log.
    pub fn lines(&self) -> Result<Vec<String>, StoreError> {
        match &self.sink {
            Sink::Memory { lines, .. } => Ok(lines.clone()),
            Sink::File { path, .. } => Ok(std::fs::read_to_string(path)?.lines().map(str::to_string).collect()),
        }
    }

    /// Folds every event with `seq > after` into `state`.
    pub fn replay_into<S: Replayable<Event = E>>(&self, state: &mut S, after: u64) {
        for s in self.since(after) {
            state.apply(s.seq, s.ts, &s.event);
        }
    }

    /// State after applying the whole log to the initial state.
    pub fn replay<S: Replayable<Event = E>>(&self) -> S {
        let mut s = S::default();
        self.replay_into(&mut s, 0);
        s
    }

    fn snapshot_path(path: &Path) -> PathBuf {
        let mut p = path.as_os_str().to_owned();
        p.push(".snapshot");
        PathBuf::from(p)
    }

    /// Writes `state` as of `seq` to the sidecar snapshot.
    pub fn write_snapshot<S: Replayable<Event = E>>(&mut self, state: &S, seq: u64) -> Result<(), StoreError> {
        let text = serde_json::to_string(&SnapshotFile { seq, state })
            .map_err(|e| StoreError::SchemaViolation(e.to_string()))?;
        match &mut self.sink {
            Sink::Memory { snapshot, .. } => *snapshot = Some(text),
            Sink::File { path, .. } => {
                let target = Self::snapshot_path(path);
                let tmp = target.with_extension("snapshot.tmp");
                let mut f = File::create(&tmp)?;
                f.write_all(text.as_bytes())?;
                f.sync_all()?;
                std::fs::rename(&tmp, &target)?;
            }
        }
        Ok(())
    }

    /// Snapshot of the full replayed state at the current head.
    pub fn snapshot<S: Replayable<Event = E>>(&mut self) -> Result<S, StoreError> {
        let state: S = self.load()?;
        let seq = self.last_seq();
        self.write_snapshot(&state, seq)?;
        Ok(state)
    }

    fn read_snapshot<S: Replayable<Event = E>>(&self) -> Option<(u64, S)> {
        let text = match &self.sink {
            Sink::Memory { snapshot, .. } => snapshot.clone()?,
            Sink::File { path, .. } => std::fs::read_to_string(Self::snapshot_path(path)).ok()?,
        };
        match serde_json::from_str::<SnapshotOwned<S>>(&text) {
            Ok(s) if s.seq <= self.last_seq() => Some((s.seq, s.state)),
            Ok(s) => {
                tracing::warn!(snapshot = s.seq, log = self.last_seq(), "snapshot is ahead of the log; ignoring it");
                None
            }
            Err(e) => {
                tracing::warn!(error = %e, "unreadable snapshot; falling back to full replay");
                None
            }
        }
    }

    /// Snapshot (when present and usable) plus suffix replay; otherwise full replay.
    pub fn load<S: Replayable<Event = E>>(&self) -> Result<S, StoreError> {
        let (after, mut state) = self.read_snapshot::<S>().unwrap_or_default();
        self.replay_into(&mut state, after);
        Ok(state)
    }
}

#[derive(Serialize)]
struct SnapshotFile<'a, S> {
    seq: u64,
    state: &'a S,
}

#[derive(Deserialize)]
struct SnapshotOwned<S> {
    seq: u64,
    state: S,
}
