//! JSON bodies of the `/v1` API. Every timestamp is RFC 3339 UTC.

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use qruntime_core::platform::BackendStatus;
use qruntime_core::scheduler::{HybridResult, ItemResult, JobKind, JobRecord, JobStatus, Progress, WorkerInfo};

pub use qruntime_core::calibration::CalibrationSnapshot as WireCalibration;
pub use qruntime_core::scheduler::JobDescriptor as WireJobDescriptor;
pub use qruntime_core::scheduler::{Reservation, Session};

/// Body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default)]
    pub details: serde_json::Value,
}

impl ErrorBody {
    pub fn new(code: impl Into<String>, message: impl Into<String>) -> Self {
        ErrorBody {
            code: code.into(),
            message: message.into(),
            details: serde_json::Value::Object(Default::default()),
        }
    }

    pub fn with_details(mut self, details: serde_json::Value) -> Self {
        self.details = details;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub job_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireJobStatus {
    pub job_id: String,
    pub user: String,
    pub kind: JobKind,
    pub backend_id: String,
    pub status: JobStatus,
    pub priority: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
    pub attempts: u32,
    pub submitted_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started_at: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<DateTime<Utc>>,
    /// Expected wait until the job starts; null once it runs or ends.
    pub eta_seconds: Option<f64>,
    pub progress: Progress,
    pub cancel_requested: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl WireJobStatus {
    pub fn new(job: &JobRecord, eta: Option<chrono::TimeDelta>) -> Self {
        WireJobStatus {
            job_id: job.job_id.clone(),
            user: job.descriptor.user.clone(),
            kind: job.descriptor.kind,
            backend_id: job.backend_id.clone(),
            status: job.status,
            priority: job.descriptor.priority,
            session_id: job.descriptor.session_id.clone(),
            attempts: job.attempts,
            submitted_at: job.submitted_at,
            started_at: job.started_at,
            finished_at: job.finished_at,
            eta_seconds: eta.map(|d| d.num_milliseconds() as f64 / 1000.0),
            progress: job.progress(),
            cancel_requested: job.cancel_requested,
            error: job.error.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireJobResults {
    pub job_id: String,
    pub status: JobStatus,
    #[serde(default)]
    pub items: Vec<ItemResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hybrid: Option<HybridResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CancelResponse {
    pub job_id: String,
    pub status: JobStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionRequest {
    pub backend_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ttl_seconds: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReservationRequest {
    pub backend_name: String,
    pub start: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_minutes: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendList {
    pub backends: Vec<BackendStatus>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireWorkerRegistration {
    pub worker_id: String,
    #[serde(default)]
    pub stages: BTreeSet<String>,
    /// Backends the worker drives; empty means all.
    #[serde(default)]
    pub backends: BTreeSet<String>,
    #[serde(default = "one")]
    pub max_parallel: u32,
}

fn one() -> u32 {
    1
}

impl WireWorkerRegistration {
    pub fn into_worker(self) -> WorkerInfo {
        let mut w = WorkerInfo::new(self.worker_id, self.stages);
        w.backends = self.backends;
        w.max_parallel = self.max_parallel;
        w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerAck {
    pub worker_id: String,
    pub last_heartbeat: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
}
