//! Job lifecycle, queueing, reservations, sessions, retries and the hybrid
//! optimizer loop.
//!
//! [`Scheduler`] is the single writer: every command is validated against
//! the current [`SchedulerState`], durably appended as a [`SchedulerEvent`]
//! and only then folded into the state. Placement itself is the pure
//! [`next_decision`].

mod policy;
mod spsa;
mod state;
mod types;

use std::collections::BTreeMap;
use std::sync::Arc;

use chrono::{DateTime, TimeDelta, Utc};
use thiserror::Error;

use crate::calibration::CalibrationSnapshot;
use crate::circuit::Violation;
use crate::pipeline::StageRegistry;
use crate::store::{EventLog, StoreError};
use crate::transpiler::{BackendCapabilities, BackendFeedback};

pub use policy::{
    backoff, blocked_by_reservation, eligible_queue, eta, next_decision, queue_key, select_backend, Assignment,
    BackendView, DefaultEstimator, Policy, QueueKey, ResourceEstimator, BACKOFF_CAP_SECS, ITEM_OVERHEAD_NS,
};
pub use spsa::{gains, initial_checkpoint, run_spsa, Probe, SpsaOutcome, Step};
pub use state::{SchedulerEvent, SchedulerState};
pub use types::{
    Checkpoint, HybridConfig, HybridResult, ItemResult, IterationRecord, JobDescriptor, JobItem, JobKind, JobRecord,
    JobResults, JobStatus, Progress, Reservation, ReservationStatus, Session, SpsaConfig, WorkerInfo,
    DEFAULT_MAX_RETRIES, DEFAULT_RESERVATION, DEFAULT_SESSION_TTL,
};

/// Backend name that asks the scheduler to choose.
pub const AUTO_BACKEND: &str = "auto";
pub const DEFAULT_USER_LIMIT: usize = 5;

#[derive(Debug, Error)]
pub enum SchedulerError {
    #[error("no live worker provides stage `{0}`")]
    CapabilityMissing(String),
    #[error("user `{user}` already has {limit} active jobs")]
    UserLimitExceeded { user: String, limit: usize },
    #[error("unknown backend `{0}`")]
    UnknownBackend(String),
    #[error("unknown job `{0}`")]
    UnknownJob(String),
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("unknown worker `{0}`")]
    UnknownWorker(String),
    #[error("unknown reservation `{0}`")]
    UnknownReservation(String),
    #[error("overlaps reservation `{reservation_id}`")]
    Conflict { reservation_id: String },
    #[error("{0}")]
    SchemaViolation(String),
    #[error("job `{0}` has no results yet")]
    NotReady(String),
    #[error("no backend can run this job")]
    NoCapableBackend,
    #[error("{0}")]
    InvalidState(String),
    #[error(transparent)]
    Storage(#[from] StoreError),
}

impl SchedulerError {
    /// Stable wire code.
    pub fn code(&self) -> &'static str {
        match self {
            SchedulerError::CapabilityMissing(_) => "CAPABILITY_MISSING",
            SchedulerError::UserLimitExceeded { .. } => "USER_LIMIT_EXCEEDED",
            SchedulerError::UnknownBackend(_) => "UNKNOWN_BACKEND",
            SchedulerError::UnknownJob(_) => "UNKNOWN_JOB",
            SchedulerError::UnknownSession(_) => "UNKNOWN_SESSION",
            SchedulerError::UnknownWorker(_) => "UNKNOWN_WORKER",
            SchedulerError::UnknownReservation(_) => "UNKNOWN_RESERVATION",
            SchedulerError::Conflict { .. } => "CONFLICT",
            SchedulerError::SchemaViolation(_) => "SCHEMA_VIOLATION",
            SchedulerError::NotReady(_) => "NOT_READY",
            SchedulerError::NoCapableBackend => "NO_CAPABLE_BACKEND",
            SchedulerError::InvalidState(_) => "INVALID_STATE",
            SchedulerError::Storage(_) => "STORAGE_FAILURE",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerConfig {
    /// Concurrent non-terminal jobs per user.
    pub user_limit: usize,
    pub policy: Policy,
    pub session_ttl: TimeDelta,
    pub reservation_duration: TimeDelta,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig {
            user_limit: DEFAULT_USER_LIMIT,
            policy: Policy::default(),
            session_ttl: DEFAULT_SESSION_TTL,
            reservation_duration: DEFAULT_RESERVATION,
        }
    }
}

/// What happened to a job after a failed attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetryOutcome {
    Requeued { not_before: DateTime<Utc> },
    Failed,
}

pub struct Scheduler {
    state: SchedulerState,
    log: EventLog<SchedulerEvent>,
    config: SchedulerConfig,
    backends: BTreeMap<String, BackendCapabilities>,
    estimator: Arc<dyn ResourceEstimator>,
    registry: Option<StageRegistry>,
}

impl std::fmt::Debug for Scheduler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Scheduler")
            .field("jobs", &self.state.jobs.len())
            .field("last_seq", &self.log.last_seq())
            .field("backends", &self.backends.keys().collect::<Vec<_>>())
            .finish_non_exhaustive()
    }
}

impl Scheduler {
    /// Rebuilds state from `log` (snapshot plus suffix when available).
    pub fn new(
        log: EventLog<SchedulerEvent>,
        backends: impl IntoIterator<Item = BackendCapabilities>,
        config: SchedulerConfig,
    ) -> Result<Self, SchedulerError> {
        let state = log.load::<SchedulerState>()?;
        Ok(Scheduler {
            state,
            log,
            config,
            backends: backends.into_iter().map(|c| (c.backend_id.clone(), c)).collect(),
            estimator: Arc::new(DefaultEstimator),
            registry: None,
        })
    }

    pub fn in_memory(backends: impl IntoIterator<Item = BackendCapabilities>, config: SchedulerConfig) -> Self {
        Self::new(EventLog::in_memory(), backends, config).expect("empty log replays")
    }

    pub fn with_estimator(mut self, estimator: Arc<dyn ResourceEstimator>) -> Self {
        self.estimator = estimator;
        self
    }

    /// Registry used to price stage overhead in duration estimates.
    pub fn with_registry(mut self, registry: StageRegistry) -> Self {
        self.registry = Some(registry);
        self
    }

    pub fn state(&self) -> &SchedulerState {
        &self.state
    }

    pub fn config(&self) -> &SchedulerConfig {
        &self.config
    }

    pub fn backends(&self) -> &BTreeMap<String, BackendCapabilities> {
        &self.backends
    }

    pub fn log(&self) -> &EventLog<SchedulerEvent> {
        &self.log
    }

    pub fn job(&self, job_id: &str) -> Result<&JobRecord, SchedulerError> {
        self.state
            .jobs
            .get(job_id)
            .ok_or_else(|| SchedulerError::UnknownJob(job_id.to_string()))
    }

    /// Writes a snapshot of the current state at the log head.
    pub fn snapshot(&mut self) -> Result<u64, SchedulerError> {
        let seq = self.log.last_seq();
        self.log.write_snapshot(&self.state, seq)?;
        Ok(seq)
    }

    fn emit(&mut self, now: DateTime<Utc>, event: SchedulerEvent) -> Result<u64, SchedulerError> {
        use crate::store::Replayable;
        let seq = self.log.append(now, event.clone())?;
        self.state.apply(seq, now, &event);
        Ok(seq)
    }

    fn live_workers(&self, now: DateTime<Utc>) -> impl Iterator<Item = &WorkerInfo> {
        let ttl = self.config.policy.worker_ttl;
        self.state.workers.values().filter(move |w| w.is_live(now, ttl))
    }

    fn backlog(&self, backend_id: &str, now: DateTime<Utc>) -> TimeDelta {
        self.state
            .jobs
            .values()
            .filter(|j| j.backend_id == backend_id && j.status.is_active())
            .map(|j| match j.started_at {
                Some(s) if j.status == JobStatus::Running => (s + j.estimated_duration() - now).max(TimeDelta::zero()),
                _ => j.estimated_duration(),
            })
            .sum()
    }

    /// Admission: validates the descriptor, resolves the backend, checks
    /// stage coverage and the user limit, then queues the job.
    pub fn submit(&mut self, mut descriptor: JobDescriptor, now: DateTime<Utc>) -> Result<String, SchedulerError> {
        if let Some(key) = &descriptor.idempotency_key {
            if let Some(id) = self.state.idempotency.get(&state::idempotency_key(&descriptor.user, key)) {
                return Ok(id.clone());
            }
        }
        let circuits = descriptor.validate().map_err(SchedulerError::SchemaViolation)?;

        if let Some(sid) = &descriptor.session_id {
            let session = self
                .state
                .sessions
                .get(sid)
                .filter(|s| s.open && s.user == descriptor.user)
                .ok_or_else(|| SchedulerError::UnknownSession(sid.clone()))?;
            if descriptor.backend_name == AUTO_BACKEND {
                descriptor.backend_name = session.backend_id.clone();
            } else if descriptor.backend_name != session.backend_id {
                return Err(SchedulerError::SchemaViolation(format!(
                    "session `{sid}` is bound to backend `{}`",
                    session.backend_id
                )));
            }
        }

        let backend_id = if descriptor.backend_name == AUTO_BACKEND {
            let views: Vec<BackendView<'_>> = self
                .backends
                .values()
                .map(|caps| BackendView {
                    caps,
                    calibration: self.state.calibration.latest(&caps.backend_id),
                    eta: self.backlog(&caps.backend_id, now),
                })
                .collect();
            select_backend(&circuits, &views).ok_or(SchedulerError::NoCapableBackend)?
        } else {
            descriptor.backend_name.clone()
        };
        let caps = self
            .backends
            .get(&backend_id)
            .ok_or_else(|| SchedulerError::UnknownBackend(backend_id.clone()))?;
        for (i, c) in circuits.iter().enumerate() {
            if let Some(Violation::TooManyQubits { required, available }) =
                c.validate(caps).into_iter().find(Violation::is_blocking)
            {
                return Err(SchedulerError::SchemaViolation(format!(
                    "items[{i}] needs {required} qubits, `{backend_id}` has {available}"
                )));
            }
            if descriptor.items[i].shots > caps.max_shots {
                return Err(SchedulerError::SchemaViolation(format!(
                    "items[{i}].shots exceeds {} for `{backend_id}`",
                    caps.max_shots
                )));
            }
        }

        let required = descriptor.required_stages();
        let capable = self
            .live_workers(now)
            .any(|w| w.serves(&backend_id) && required.is_subset(&w.stages));
        if !required.is_empty() && !capable {
            let missing = required
                .iter()
                .find(|s| !self.live_workers(now).any(|w| w.serves(&backend_id) && w.stages.contains(*s)))
                .cloned()
                .unwrap_or_else(|| required.iter().cloned().collect::<Vec<_>>().join("+"));
            return Err(SchedulerError::CapabilityMissing(missing));
        }

        if self.state.active_jobs_of(&descriptor.user) >= self.config.user_limit {
            return Err(SchedulerError::UserLimitExceeded {
                user: descriptor.user.clone(),
                limit: self.config.user_limit,
            });
        }

        let stage_cost = |i: usize| -> f64 {
            self.registry
                .as_ref()
                .and_then(|r| r.resolve(&descriptor.items[i].execution_options).ok())
                .map_or(1.0, |c| c.cost_factor())
        };
        let estimate = self.estimator.estimate_job(
            &descriptor,
            &circuits,
            caps,
            &stage_cost,
            self.state.feedback.get(&backend_id),
        );
        let job_id = format!("job-{:08}", self.state.job_counter + 1);
        let record = JobRecord {
            job_id: job_id.clone(),
            backend_id,
            status: JobStatus::Queued,
            attempts: 0,
            submitted_at: now,
            started_at: None,
            finished_at: None,
            not_before: None,
            required_stages: required,
            estimated_duration_ns: estimate,
            worker_id: None,
            checkpoint: None,
            partial: Vec::new(),
            results: None,
            error: None,
            cancel_requested: false,
            descriptor,
        };
        self.emit(
            now,
            SchedulerEvent::JobSubmitted {
                record: Box::new(record),
            },
        )?;
        Ok(job_id)
    }

    /// Cancels a job. Queued and scheduled jobs stop at once; a running job
    /// is flagged and stops at its next item or iteration boundary.
    /// Cancelling a finished job is a no-op.
    pub fn cancel(&mut self, job_id: &str, now: DateTime<Utc>) -> Result<JobStatus, SchedulerError> {
        let job = self.job(job_id)?;
        match job.status {
            JobStatus::Queued | JobStatus::Scheduled => {
                self.emit(now, SchedulerEvent::JobCancelled { job_id: job_id.into() })?;
            }
            JobStatus::Running if !job.cancel_requested => {
                self.emit(now, SchedulerEvent::CancelRequested { job_id: job_id.into() })?;
            }
            _ => {}
        }
        Ok(self.job(job_id)?.status)
    }

    /// Called by the executing worker once it has stopped a flagged job.
    pub fn acknowledge_cancel(&mut self, job_id: &str, now: DateTime<Utc>) -> Result<(), SchedulerError> {
        if self.job(job_id)?.status == JobStatus::Running {
            self.emit(
                now,
                SchedulerEvent::JobRequeued {
                    job_id: job_id.into(),
                    reason: "cancelled".into(),
                    not_before: None,
                    refund_attempt: true,
                },
            )?;
        }
        if self.job(job_id)?.status.is_active() {
            self.emit(now, SchedulerEvent::JobCancelled { job_id: job_id.into() })?;
        }
        Ok(())
    }

    pub fn register_worker(&mut self, worker: WorkerInfo, now: DateTime<Utc>) -> Result<(), SchedulerError> {
        if worker.worker_id.is_empty() {
            return Err(SchedulerError::SchemaViolation("worker_id must not be empty".into()));
        }
        if worker.max_parallel == 0 {
            return Err(SchedulerError::SchemaViolation("max_parallel must be at least 1".into()));
        }
        if let Some(b) = worker.backends.iter().find(|b| !self.backends.contains_key(*b)) {
            return Err(SchedulerError::UnknownBackend(b.clone()));
        }
        self.emit(now, SchedulerEvent::WorkerRegistered { worker })?;
        Ok(())
    }

    /// Refreshes liveness; a lapsed worker is registered again.
    pub fn heartbeat(&mut self, worker_id: &str, now: DateTime<Utc>) -> Result<(), SchedulerError> {
        let w = self
            .state
            .workers
            .get_mut(worker_id)
            .ok_or_else(|| SchedulerError::UnknownWorker(worker_id.to_string()))?;
        if w.is_live(now, self.config.policy.worker_ttl) {
            w.last_heartbeat = w.last_heartbeat.max(now);
            return Ok(());
        }
        let worker = w.clone();
        self.emit(now, SchedulerEvent::WorkerRegistered { worker })?;
        Ok(())
    }

    /// Expires workers whose heartbeat is older than the TTL and requeues
    /// their jobs. Returns the expired worker ids.
    pub fn expire_workers(&mut self, now: DateTime<Utc>) -> Result<Vec<String>, SchedulerError> {
        let ttl = self.config.policy.worker_ttl;
        let lapsed: Vec<String> = self
            .state
            .workers
            .values()
            .filter(|w| !w.expired && now - w.last_heartbeat > ttl)
            .map(|w| w.worker_id.clone())
            .collect();
        for id in &lapsed {
            self.emit(now, SchedulerEvent::WorkerExpired { worker_id: id.clone() })?;
            let held: Vec<(String, JobStatus)> = self
                .state
                .jobs
                .values()
                .filter(|j| j.worker_id.as_deref() == Some(id.as_str()))
                .map(|j| (j.job_id.clone(), j.status))
                .collect();
            for (job_id, status) in held {
                match status {
                    JobStatus::Scheduled => {
                        self.emit(
                            now,
                            SchedulerEvent::JobRequeued {
                                job_id,
                                reason: format!("worker `{id}` expired"),
                                not_before: None,
                                refund_attempt: false,
                            },
                        )?;
                    }
                    JobStatus::Running => {
                        self.fail_attempt(&job_id, &format!("worker `{id}` expired"), now)?;
                    }
                    _ => {}
                }
            }
        }
        Ok(lapsed)
    }

    pub fn reserve(
        &mut self,
        backend_id: &str,
        user: &str,
        start: DateTime<Utc>,
        duration: Option<TimeDelta>,
        now: DateTime<Utc>,
    ) -> Result<Reservation, SchedulerError> {
        if !self.backends.contains_key(backend_id) {
            return Err(SchedulerError::UnknownBackend(backend_id.to_string()));
        }
        let duration = duration.unwrap_or(self.config.reservation_duration);
        if duration <= TimeDelta::zero() {
            return Err(SchedulerError::SchemaViolation("duration must be positive".into()));
        }
        if start < now {
            return Err(SchedulerError::SchemaViolation("start lies in the past".into()));
        }
        let end = start + duration;
        if let Some(r) = self
            .state
            .active_reservations(backend_id)
            .find(|r| r.overlaps(start, end))
        {
            return Err(SchedulerError::Conflict {
                reservation_id: r.reservation_id.clone(),
            });
        }
        let reservation = Reservation {
            reservation_id: format!("res-{:06}", self.state.reservation_counter + 1),
            backend_id: backend_id.to_string(),
            user: user.to_string(),
            start,
            duration_secs: duration.num_seconds().max(1),
            status: ReservationStatus::Active,
        };
        self.emit(
            now,
            SchedulerEvent::ReservationCreated {
                reservation: reservation.clone(),
            },
        )?;
        Ok(reservation)
    }

    pub fn cancel_reservation(&mut self, reservation_id: &str, user: &str, now: DateTime<Utc>) -> Result<(), SchedulerError> {
        match self.state.reservations.get(reservation_id) {
            Some(r) if r.user == user => {
                if r.status == ReservationStatus::Active {
                    self.emit(
                        now,
                        SchedulerEvent::ReservationCancelled {
                            reservation_id: reservation_id.into(),
                        },
                    )?;
                }
                Ok(())
            }
            _ => Err(SchedulerError::UnknownReservation(reservation_id.to_string())),
        }
    }

    pub fn open_session(
        &mut self,
        user: &str,
        backend_id: &str,
        ttl: Option<TimeDelta>,
        now: DateTime<Utc>,
    ) -> Result<Session, SchedulerError> {
        if !self.backends.contains_key(backend_id) {
            return Err(SchedulerError::UnknownBackend(backend_id.to_string()));
        }
        let ttl = ttl.unwrap_or(self.config.session_ttl);
        if ttl <= TimeDelta::zero() {
            return Err(SchedulerError::SchemaViolation("ttl must be positive".into()));
        }
        let session = Session {
            session_id: format!("ses-{:06}", self.state.session_counter + 1),
            user: user.to_string(),
            backend_id: backend_id.to_string(),
            ttl_secs: ttl.num_seconds().max(1),
            opened_at: now,
            last_activity: now,
            open: true,
        };
        self.emit(now, SchedulerEvent::SessionOpened { session: session.clone() })?;
        Ok(session)
    }

    /// Closing is idempotent for the owner.
    pub fn close_session(&mut self, session_id: &str, user: &str, now: DateTime<Utc>) -> Result<(), SchedulerError> {
        match self.state.sessions.get(session_id) {
            Some(s) if s.user == user => {
                if s.open {
                    self.emit(
                        now,
                        SchedulerEvent::SessionClosed {
                            session_id: session_id.into(),
                        },
                    )?;
                }
                Ok(())
            }
            _ => Err(SchedulerError::UnknownSession(session_id.to_string())),
        }
    }

    /// Runs [`next_decision`] and records the resulting assignments.
    pub fn assign(&mut self, now: DateTime<Utc>) -> Result<Vec<Assignment>, SchedulerError> {
        let decisions = next_decision(&self.state, now, &self.config.policy);
        for a in &decisions {
            self.emit(
                now,
                SchedulerEvent::JobScheduled {
                    job_id: a.job_id.clone(),
                    worker_id: a.worker_id.clone(),
                },
            )?;
        }
        Ok(decisions)
    }

    /// The assigned worker picks the job up. Returns the record to execute,
    /// or `None` when the job was cancelled or reassigned meanwhile.
    pub fn start(&mut self, job_id: &str, worker_id: &str, now: DateTime<Utc>) -> Result<Option<JobRecord>, SchedulerError> {
        let job = self.job(job_id)?;
        if job.status != JobStatus::Scheduled || job.worker_id.as_deref() != Some(worker_id) {
            return Ok(None);
        }
        if job.cancel_requested {
            self.emit(now, SchedulerEvent::JobCancelled { job_id: job_id.into() })?;
            return Ok(None);
        }
        self.emit(now, SchedulerEvent::JobStarted { job_id: job_id.into() })?;
        Ok(Some(self.job(job_id)?.clone()))
    }

    /// True while `worker_id` legitimately runs `job_id`.
    pub fn holds(&self, job_id: &str, worker_id: &str) -> bool {
        self.state
            .jobs
            .get(job_id)
            .is_some_and(|j| j.status == JobStatus::Running && j.worker_id.as_deref() == Some(worker_id))
    }

    pub fn item_completed(&mut self, job_id: &str, result: ItemResult, now: DateTime<Utc>) -> Result<(), SchedulerError> {
        self.emit(
            now,
            SchedulerEvent::ItemCompleted {
                job_id: job_id.into(),
                result: Box::new(result),
            },
        )?;
        Ok(())
    }

    pub fn save_checkpoint(&mut self, job_id: &str, checkpoint: Checkpoint, now: DateTime<Utc>) -> Result<(), SchedulerError> {
        self.emit(
            now,
            SchedulerEvent::CheckpointSaved {
                job_id: job_id.into(),
                checkpoint: Box::new(checkpoint),
            },
        )?;
        Ok(())
    }

    pub fn complete(&mut self, job_id: &str, results: JobResults, now: DateTime<Utc>) -> Result<(), SchedulerError> {
        if self.job(job_id)?.status != JobStatus::Running {
            return Err(SchedulerError::InvalidState(format!("job `{job_id}` is not running")));
        }
        self.emit(
            now,
            SchedulerEvent::JobCompleted {
                job_id: job_id.into(),
                results: Box::new(results),
            },
        )?;
        Ok(())
    }

    /// Retry handling for a failed attempt of a running job: back to the
    /// queue after `min(2^attempts, 60)` s, or FAILED once `max_retries`
    /// retries are used up. Checkpoints are kept either way.
    pub fn fail_attempt(&mut self, job_id: &str, error: &str, now: DateTime<Utc>) -> Result<RetryOutcome, SchedulerError> {
        let job = self.job(job_id)?;
        if job.status != JobStatus::Running {
            return Err(SchedulerError::InvalidState(format!("job `{job_id}` is not running")));
        }
        if job.attempts > job.descriptor.max_retries {
            self.emit(
                now,
                SchedulerEvent::JobFailed {
                    job_id: job_id.into(),
                    error: error.to_string(),
                },
            )?;
            return Ok(RetryOutcome::Failed);
        }
        let not_before = now + backoff(job.attempts);
        self.emit(
            now,
            SchedulerEvent::JobRequeued {
                job_id: job_id.into(),
                reason: error.to_string(),
                not_before: Some(not_before),
                refund_attempt: false,
            },
        )?;
        Ok(RetryOutcome::Requeued { not_before })
    }

    /// Fails a running job without retrying (e.g. a permanent error).
    pub fn fail(&mut self, job_id: &str, error: &str, now: DateTime<Utc>) -> Result<(), SchedulerError> {
        self.emit(
            now,
            SchedulerEvent::JobFailed {
                job_id: job_id.into(),
                error: error.to_string(),
            },
        )?;
        Ok(())
    }

    /// Continuation after a restart: every job that was scheduled or running
    /// goes back to the queue with its checkpoint and without penalty.
    pub fn requeue_interrupted(&mut self, now: DateTime<Utc>) -> Result<Vec<String>, SchedulerError> {
        let ids: Vec<String> = self
            .state
            .jobs
            .values()
            .filter(|j| matches!(j.status, JobStatus::Scheduled | JobStatus::Running))
            .map(|j| j.job_id.clone())
            .collect();
        for id in &ids {
            self.emit(
                now,
                SchedulerEvent::JobRequeued {
                    job_id: id.clone(),
                    reason: "platform restarted".into(),
                    not_before: None,
                    refund_attempt: true,
                },
            )?;
        }
        Ok(ids)
    }

    pub fn record_calibration(&mut self, snapshot: CalibrationSnapshot, now: DateTime<Utc>) -> Result<(), SchedulerError> {
        self.emit(
            now,
            SchedulerEvent::CalibrationRecorded {
                snapshot: Box::new(snapshot),
            },
        )?;
        Ok(())
    }

    pub fn record_feedback(&mut self, backend_id: &str, feedback: BackendFeedback, now: DateTime<Utc>) -> Result<(), SchedulerError> {
        self.emit(
            now,
            SchedulerEvent::FeedbackRecorded {
                backend_id: backend_id.into(),
                feedback,
            },
        )?;
        Ok(())
    }

    /// Expected wait until the job starts; zero once it is placed.
    pub fn eta(&self, job_id: &str, now: DateTime<Utc>) -> Result<Option<TimeDelta>, SchedulerError> {
        self.job(job_id)?;
        Ok(eta(&self.state, job_id, now))
    }
}
