use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::calibration::{CalibrationHistory, CalibrationSnapshot};
use crate::store::Replayable;
use crate::transpiler::BackendFeedback;

use super::types::{
    Checkpoint, ItemResult, JobRecord, JobResults, JobStatus, Reservation, ReservationStatus, Session, WorkerInfo,
};

/// Every durable scheduler transition. Heartbeats are deliberately absent:
/// liveness is re-established by the workers after a restart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum SchedulerEvent {
    JobSubmitted {
        record: Box<JobRecord>,
    },
    JobScheduled {
        job_id: String,
        worker_id: String,
    },
    JobStarted {
        job_id: String,
    },
    ItemCompleted {
        job_id: String,
        result: Box<ItemResult>,
    },
    CheckpointSaved {
        job_id: String,
        checkpoint: Box<Checkpoint>,
    },
    JobCompleted {
        job_id: String,
        results: Box<JobResults>,
    },
    JobRequeued {
        job_id: String,
        reason: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        not_before: Option<DateTime<Utc>>,
        /// The interrupted attempt is not held against the job.
        #[serde(default)]
        refund_attempt: bool,
    },
    JobFailed {
        job_id: String,
        error: String,
    },
    CancelRequested {
        job_id: String,
    },
    JobCancelled {
        job_id: String,
    },
    WorkerRegistered {
        worker: WorkerInfo,
    },
    WorkerExpired {
        worker_id: String,
    },
    ReservationCreated {
        reservation: Reservation,
    },
    ReservationCancelled {
        reservation_id: String,
    },
    SessionOpened {
        session: Session,
    },
    SessionClosed {
        session_id: String,
    },
    CalibrationRecorded {
        snapshot: Box<CalibrationSnapshot>,
    },
    FeedbackRecorded {
        backend_id: String,
        feedback: BackendFeedback,
    },
}

/// Everything the scheduler knows, rebuilt by folding [`SchedulerEvent`]s.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SchedulerState {
    pub jobs: BTreeMap<String, JobRecord>,
    pub workers: BTreeMap<String, WorkerInfo>,
    pub reservations: BTreeMap<String, Reservation>,
    pub sessions: BTreeMap<String, Session>,
    /// `user \u{1f} key` → job id.
    pub idempotency: BTreeMap<String, String>,
    /// Session of the job most recently placed on each backend.
    pub last_session: BTreeMap<String, String>,
    pub calibration: CalibrationHistory,
    pub feedback: BTreeMap<String, BackendFeedback>,
    pub job_counter: u64,
    pub reservation_counter: u64,
    pub session_counter: u64,
    /// Number of illegal transitions that were refused while folding.
    pub rejected_transitions: u64,
}

pub(crate) fn idempotency_key(user: &str, key: &str) -> String {
    format!("{user}\u{1f}{key}")
}

impl SchedulerState {
    pub fn job(&self, job_id: &str) -> Option<&JobRecord> {
        self.jobs.get(job_id)
    }

    /// Jobs of `user` that are not terminal yet.
    pub fn active_jobs_of(&self, user: &str) -> usize {
        self.jobs
            .values()
            .filter(|j| j.descriptor.user == user && j.status.is_active())
            .count()
    }

    /// The job currently holding `backend_id`, if any.
    pub fn occupant(&self, backend_id: &str) -> Option<&JobRecord> {
        self.jobs
            .values()
            .find(|j| j.backend_id == backend_id && matches!(j.status, JobStatus::Scheduled | JobStatus::Running))
    }

    /// Assigned jobs per worker.
    pub fn worker_load(&self) -> BTreeMap<&str, u32> {
        let mut load = BTreeMap::new();
        for j in self.jobs.values() {
            if let (Some(w), JobStatus::Scheduled | JobStatus::Running) = (&j.worker_id, j.status) {
                *load.entry(w.as_str()).or_insert(0) += 1;
            }
        }
        load
    }

    pub fn active_reservations<'a>(&'a self, backend_id: &'a str) -> impl Iterator<Item = &'a Reservation> + 'a {
        self.reservations
            .values()
            .filter(move |r| r.backend_id == backend_id && r.status == ReservationStatus::Active)
    }

    fn transition(&mut self, job_id: &str, next: JobStatus) -> Option<&mut JobRecord> {
        let Some(job) = self.jobs.get_mut(job_id) else {
            tracing::warn!(job_id, "event for unknown job");
            self.rejected_transitions += 1;
            return None;
        };
        if !job.status.can_become(next) {
            tracing::warn!(job_id, from = %job.status, to = %next, "refusing illegal transition");
            self.rejected_transitions += 1;
            return None;
        }
        job.status = next;
        self.jobs.get_mut(job_id)
    }

    fn touch_session(&mut self, session_id: Option<&String>, ts: DateTime<Utc>) {
        if let Some(s) = session_id.and_then(|id| self.sessions.get_mut(id)) {
            if s.open {
                s.last_activity = ts;
            }
        }
    }
}

impl Replayable for SchedulerState {
    type Event = SchedulerEvent;

    fn apply(&mut self, _seq: u64, ts: DateTime<Utc>, event: &SchedulerEvent) {
        use SchedulerEvent::*;
        match event {
            JobSubmitted { record } => {
                self.job_counter += 1;
                if let Some(key) = &record.descriptor.idempotency_key {
                    self.idempotency
                        .insert(idempotency_key(&record.descriptor.user, key), record.job_id.clone());
                }
                let session = record.descriptor.session_id.clone();
                self.jobs.insert(record.job_id.clone(), (**record).clone());
                self.touch_session(session.as_ref(), ts);
            }
            JobScheduled { job_id, worker_id } => {
                if let Some(job) = self.transition(job_id, JobStatus::Scheduled) {
                    job.worker_id = Some(worker_id.clone());
                    let (backend, session) = (job.backend_id.clone(), job.descriptor.session_id.clone());
                    match session {
                        Some(s) => self.last_session.insert(backend, s),
                        None => self.last_session.remove(&backend),
                    };
                }
            }
            JobStarted { job_id } => {
                if let Some(job) = self.transition(job_id, JobStatus::Running) {
                    job.attempts += 1;
                    job.started_at = Some(ts);
                    job.not_before = None;
                    let session = job.descriptor.session_id.clone();
                    self.touch_session(session.as_ref(), ts);
                }
            }
            ItemCompleted { job_id, result } => match self.jobs.get_mut(job_id) {
                Some(job) if job.status == JobStatus::Running => {
                    job.partial.retain(|r| r.index != result.index);
                    job.partial.push((**result).clone());
                }
                _ => self.rejected_transitions += 1,
            },
            CheckpointSaved { job_id, checkpoint } => match self.jobs.get_mut(job_id) {
                Some(job) if job.status == JobStatus::Running => job.checkpoint = Some((**checkpoint).clone()),
                _ => self.rejected_transitions += 1,
            },
            JobCompleted { job_id, results } => {
                if let Some(job) = self.transition(job_id, JobStatus::Completed) {
                    job.results = Some((**results).clone());
                    job.partial.clear();
                    job.finished_at = Some(ts);
                    job.worker_id = None;
                    job.error = None;
                    let session = job.descriptor.session_id.clone();
                    self.touch_session(session.as_ref(), ts);
                }
            }
            JobRequeued {
                job_id,
                reason,
                not_before,
                refund_attempt,
            } => {
                let was_running = self.jobs.get(job_id).is_some_and(|j| j.status == JobStatus::Running);
                if let Some(job) = self.transition(job_id, JobStatus::Queued) {
                    if *refund_attempt && was_running {
                        job.attempts = job.attempts.saturating_sub(1);
                    }
                    job.worker_id = None;
                    job.not_before = *not_before;
                    job.error = Some(reason.clone());
                }
            }
            JobFailed { job_id, error } => {
                if let Some(job) = self.transition(job_id, JobStatus::Failed) {
                    job.error = Some(error.clone());
                    job.finished_at = Some(ts);
                    job.worker_id = None;
                }
            }
            CancelRequested { job_id } => match self.jobs.get_mut(job_id) {
                Some(job) => job.cancel_requested = true,
                None => self.rejected_transitions += 1,
            },
            JobCancelled { job_id } => {
                if let Some(job) = self.transition(job_id, JobStatus::Cancelled) {
                    job.cancel_requested = true;
                    job.finished_at = Some(ts);
                    job.worker_id = None;
                }
            }
            WorkerRegistered { worker } => {
                let mut w = worker.clone();
                w.last_heartbeat = ts;
                w.expired = false;
                self.workers.insert(w.worker_id.clone(), w);
            }
            WorkerExpired { worker_id } => {
                if let Some(w) = self.workers.get_mut(worker_id) {
                    w.expired = true;
                }
            }
            ReservationCreated { reservation } => {
                self.reservation_counter += 1;
                self.reservations
                    .insert(reservation.reservation_id.clone(), reservation.clone());
            }
            ReservationCancelled { reservation_id } => {
                if let Some(r) = self.reservations.get_mut(reservation_id) {
                    r.status = ReservationStatus::Cancelled;
                }
            }
            SessionOpened { session } => {
                self.session_counter += 1;
                self.sessions.insert(session.session_id.clone(), session.clone());
            }
            SessionClosed { session_id } => {
                if let Some(s) = self.sessions.get_mut(session_id) {
                    s.open = false;
                }
            }
            CalibrationRecorded { snapshot } => {
                self.calibration.record((**snapshot).clone());
            }
            FeedbackRecorded { backend_id, feedback } => {
                self.feedback.insert(backend_id.clone(), feedback.clone());
            }
        }
    }
}
