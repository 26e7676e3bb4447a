//! Calibration snapshots and the manager that polls, stamps, persists and
//! serves them per backend.

mod snapshot;

use std::collections::{BTreeMap, VecDeque};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, TimeDelta, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::Backend;
use crate::clock::Clock;

pub use snapshot::{CalibrationSnapshot, GateCalibration, QubitCalibration};

pub const DEFAULT_RETENTION: usize = 1000;
pub const DEFAULT_POLL_INTERVAL: TimeDelta = TimeDelta::seconds(60);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("adapter for backend `{backend}` unavailable: {reason}")]
    AdapterUnavailable { backend: String, reason: String },
    #[error("no calibration data for backend `{0}`")]
    NoData(String),
    #[error("failed to persist calibration: {0}")]
    Storage(String),
    #[error("invalid snapshot: {0}")]
    Invalid(String),
}

/// Durable destination for accepted snapshots.
pub trait CalibrationSink: Send + Sync {
    fn persist(&self, snapshot: &CalibrationSnapshot) -> Result<(), String>;
}

/// Bounded, strictly time-ordered per-backend snapshot histories.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CalibrationHistory {
    #[serde(default)]
    backends: BTreeMap<String, VecDeque<CalibrationSnapshot>>,
    #[serde(default = "default_retention")]
    retention: usize,
}

fn default_retention() -> usize {
    DEFAULT_RETENTION
}

impl CalibrationHistory {
    pub fn new(retention: usize) -> Self {
        CalibrationHistory {
            backends: BTreeMap::new(),
            retention: retention.max(1),
        }
    }

    /// Appends a snapshot; ignored unless it is strictly newer than the latest one.
    pub fn record(&mut self, snapshot: CalibrationSnapshot) -> bool {
        let retention = if self.retention == 0 { DEFAULT_RETENTION } else { self.retention };
        let hist = self.backends.entry(snapshot.backend_id.clone()).or_default();
        if hist.back().is_some_and(|last| last.timestamp >= snapshot.timestamp) {
            return false;
        }
        hist.push_back(snapshot);
        while hist.len() > retention {
            hist.pop_front();
        }
        true
    }

    pub fn latest(&self, backend_id: &str) -> Option<&CalibrationSnapshot> {
        self.backends.get(backend_id).and_then(|h| h.back())
    }

    pub fn range(
        &self,
        backend_id: &str,
        from: DateTime<Utc>,
        to: DateTime<Utc>,
    ) -> Vec<CalibrationSnapshot> {
        self.backends
            .get(backend_id)
            .map(|h| {
                h.iter()
                    .filter(|s| s.timestamp >= from && s.timestamp <= to)
                    .cloned()
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn len(&self, backend_id: &str) -> usize {
        self.backends.get(backend_id).map_or(0, VecDeque::len)
    }

    pub fn is_empty(&self) -> bool {
        self.backends.values().all(VecDeque::is_empty)
    }
}

/// Serves the freshest calibration per backend; one writer per backend, many readers.
pub struct CalibrationManager {
    history: RwLock<CalibrationHistory>,
    write_locks: Mutex<BTreeMap<String, Arc<Mutex<()>>>>,
    failures: Mutex<BTreeMap<String, (DateTime<Utc>, String)>>,
    sink: Option<Arc<dyn CalibrationSink>>,
    clock: Arc<dyn Clock>,
}

impl CalibrationManager {
    pub fn new(clock: Arc<dyn Clock>) -> Self {
        Self::with_history(clock, CalibrationHistory::new(DEFAULT_RETENTION), None)
    }

    pub fn with_history(
        clock: Arc<dyn Clock>,
        history: CalibrationHistory,
        sink: Option<Arc<dyn CalibrationSink>>,
    ) -> Self {
        CalibrationManager {
            history: RwLock::new(history),
            write_locks: Mutex::new(BTreeMap::new()),
            failures: Mutex::new(BTreeMap::new()),
            sink,
            clock,
        }
    }

    fn backend_lock(&self, backend_id: &str) -> Arc<Mutex<()>> {
        self.write_locks
            .lock()
            .unwrap()
            .entry(backend_id.to_string())
            .or_default()
            .clone()
    }

    /// Fetches a snapshot from the adapter, stamps it with the receipt time,
    /// persists it and makes it the latest one.
    pub fn poll(&self, adapter: &dyn Backend) -> Result<CalibrationSnapshot, CalibrationError> {
        let backend_id = adapter.capabilities().backend_id.clone();
        let lock = self.backend_lock(&backend_id);
        let _guard = lock.lock().unwrap();

        let mut snapshot = match adapter.calibration() {
            Ok(s) => s,
            Err(e) => {
                let reason = e.to_string();
                self.failures
                    .lock()
                    .unwrap()
                    .insert(backend_id.clone(), (self.clock.now(), reason.clone()));
                tracing::warn!(backend = %backend_id, %reason, "calibration poll failed");
                return Err(CalibrationError::AdapterUnavailable {
                    backend: backend_id,
                    reason,
                });
            }
        };
        snapshot.check().map_err(CalibrationError::Invalid)?;
        snapshot.backend_id = backend_id.clone();
        let mut stamp = self.clock.now();
        if let Some(last) = self.history.read().unwrap().latest(&backend_id) {
            // Receipt times can collide on a coarse or frozen clock.
            if stamp <= last.timestamp {
                stamp = last.timestamp + TimeDelta::microseconds(1);
            }
        }
        snapshot.timestamp = stamp;
        if let Some(sink) = &self.sink {
            sink.persist(&snapshot).map_err(CalibrationError::Storage)?;
        }
        self.history.write().unwrap().record(snapshot.clone());
        Ok(snapshot)
    }

    pub fn latest(&self, backend_id: &str) -> Result<CalibrationSnapshot, CalibrationError> {
        self.history
            .read()
            .unwrap()
            .latest(backend_id)
            .cloned()
            .ok_or_else(|| CalibrationError::NoData(backend_id.to_string()))
    }

    /// Snapshots with timestamp in `[from, to]`, ascending.
    pub fn history(
        &self,
        backend_id: &str,
        from: DateTime<Utc>,
        to: DateTime<Utc>,
    ) -> Vec<CalibrationSnapshot> {
        if from > to {
            return Vec::new();
        }
        self.history.read().unwrap().range(backend_id, from, to)
    }

    pub fn last_failure(&self, backend_id: &str) -> Option<(DateTime<Utc>, String)> {
        self.failures.lock().unwrap().get(backend_id).cloned()
    }

    /// Copy of the full history, for snapshots of platform state.
    pub fn export(&self) -> CalibrationHistory {
        self.history.read().unwrap().clone()
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }
}

/// Number of polls a periodic poller owes between `started` and `now`.
///
/// The first poll happens at start, then one per elapsed interval.
pub fn polls_due(started: DateTime<Utc>, now: DateTime<Utc>, interval: TimeDelta) -> u64 {
    if now < started || interval <= TimeDelta::zero() {
        return 0;
    }
    let elapsed = (now - started).num_microseconds().unwrap_or(i64::MAX);
    let step = interval.num_microseconds().unwrap_or(i64::MAX).max(1);
    (elapsed / step) as u64 + 1
}
