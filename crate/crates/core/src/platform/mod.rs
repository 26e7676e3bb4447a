//! The assembled runtime: simulated fleet, calibration polling, durable
//! scheduler, dispatcher and worker threads.
//!
//! All state changes go through the [`Scheduler`] and its event log, so a
//! platform started on the same state directory after a crash continues
//! every unfinished job from its last item or checkpoint.

pub mod runner;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use chrono::{DateTime, TimeDelta, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{default_fleet, Backend, DeviceConfig, SimulatedDevice};
use crate::calibration::{
    CalibrationError, CalibrationManager, CalibrationSink, CalibrationSnapshot, DEFAULT_POLL_INTERVAL,
};
use crate::clock::{Clock, SystemClock};
use crate::pipeline::StageRegistry;
use crate::scheduler::{
    Checkpoint, ItemResult, JobDescriptor, JobRecord, JobStatus, Reservation, Scheduler, SchedulerConfig,
    SchedulerError, SchedulerEvent, Session, Step, WorkerInfo,
};
use crate::store::{EventLog, StoreError};
use crate::transpiler::{BackendCapabilities, DurationModel, DEFAULT_STALENESS_LIMIT};

use runner::{JobObserver, JobRunner, RunError, RunOutcome};

pub const EVENT_LOG_FILE: &str = "events.log";

#[derive(Debug, Error)]
pub enum PlatformError {
    #[error(transparent)]
    Scheduler(#[from] SchedulerError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("timed out waiting for `{0}`")]
    Timeout(String),
}

impl PlatformError {
    /// Stable wire code.
    pub fn code(&self) -> &'static str {
        match self {
            PlatformError::Scheduler(e) => e.code(),
            PlatformError::Calibration(CalibrationError::NoData(_)) => "NO_DATA",
            PlatformError::Calibration(CalibrationError::AdapterUnavailable { .. }) => "ADAPTER_UNAVAILABLE",
            PlatformError::Calibration(_) => "CALIBRATION_FAILURE",
            PlatformError::Store(_) | PlatformError::Io(_) => "STORAGE_FAILURE",
            PlatformError::Timeout(_) => "TIMEOUT",
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlatformConfig {
    pub fleet: Vec<DeviceConfig>,
    pub scheduler: SchedulerConfig,
    pub staleness_limit: TimeDelta,
    pub poll_interval: TimeDelta,
    /// Event log and snapshot location; in-memory when unset.
    pub state_dir: Option<PathBuf>,
    /// In-process workers offering every registered stage.
    pub builtin_workers: usize,
    pub worker_parallelism: u32,
    /// Dispatcher period.
    pub tick: Duration,
    /// Events between state snapshots.
    pub snapshot_every: u64,
    pub device_timeout: Duration,
}

impl Default for PlatformConfig {
    fn default() -> Self {
        PlatformConfig {
            fleet: default_fleet(),
            scheduler: SchedulerConfig::default(),
            staleness_limit: DEFAULT_STALENESS_LIMIT,
            poll_interval: DEFAULT_POLL_INTERVAL,
            state_dir: None,
            builtin_workers: 2,
            worker_parallelism: 1,
            tick: Duration::from_millis(20),
            snapshot_every: 512,
            device_timeout: Duration::from_secs(120),
        }
    }
}

/// Fleet entry as reported to clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendStatus {
    pub backend_id: String,
    pub capabilities: BackendCapabilities,
    pub available: bool,
    /// Jobs queued, scheduled or running on this backend.
    pub pending_jobs: usize,
    /// Payloads waiting or running on the device itself.
    pub device_queue: usize,
    pub calibration_ts: Option<DateTime<Utc>>,
}

struct SchedulerSink {
    scheduler: Arc<Mutex<Scheduler>>,
    clock: Arc<dyn Clock>,
}

impl CalibrationSink for SchedulerSink {
    fn persist(&self, snapshot: &CalibrationSnapshot) -> Result<(), String> {
        let now = self.clock.now();
        lock(&self.scheduler)
            .record_calibration(snapshot.clone(), now)
            .map_err(|e| e.to_string())
    }
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

struct Inner {
    config: PlatformConfig,
    clock: Arc<dyn Clock>,
    scheduler: Arc<Mutex<Scheduler>>,
    devices: BTreeMap<String, Arc<SimulatedDevice>>,
    calibrations: CalibrationManager,
    registry: StageRegistry,
    durations: DurationModel,
    builtin: Vec<String>,
    channels: Mutex<BTreeMap<String, Sender<String>>>,
    threads: Mutex<Vec<JoinHandle<()>>>,
    stop: AtomicBool,
}

/// A running platform instance. Dropping it stops all threads.
pub struct Platform {
    inner: Arc<Inner>,
}

impl std::fmt::Debug for Platform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Platform")
            .field("backends", &self.inner.devices.keys().collect::<Vec<_>>())
            .field("state_dir", &self.inner.config.state_dir)
            .finish_non_exhaustive()
    }
}

impl Platform {
    pub fn start(config: PlatformConfig) -> Result<Self, PlatformError> {
        Self::start_with_clock(config, Arc::new(SystemClock))
    }

    /// Loads state, requeues interrupted jobs, polls every device once and
    /// starts the dispatcher and workers.
    pub fn start_with_clock(config: PlatformConfig, clock: Arc<dyn Clock>) -> Result<Self, PlatformError> {
        let log = match &config.state_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                let log = EventLog::<SchedulerEvent>::open(dir.join(EVENT_LOG_FILE))?;
                if let Some(t) = log.truncation() {
                    tracing::warn!(?t, "event log had a damaged tail");
                }
                log
            }
            None => EventLog::in_memory(),
        };
        let registry = StageRegistry::with_builtins();
        let caps: Vec<BackendCapabilities> = config.fleet.iter().map(DeviceConfig::capabilities).collect();
        let mut scheduler = Scheduler::new(log, caps, config.scheduler.clone())?.with_registry(registry.clone());
        let now = clock.now();
        let requeued = scheduler.requeue_interrupted(now)?;
        if !requeued.is_empty() {
            tracing::info!(jobs = ?requeued, "continuing interrupted jobs");
        }
        let history = scheduler.state().calibration.clone();
        let durations = DurationModel::from_state(scheduler.state().feedback.clone());
        let scheduler = Arc::new(Mutex::new(scheduler));
        let sink = SchedulerSink {
            scheduler: scheduler.clone(),
            clock: clock.clone(),
        };
        let calibrations = CalibrationManager::with_history(clock.clone(), history, Some(Arc::new(sink)));
        let devices = config
            .fleet
            .iter()
            .map(|d| (d.id.clone(), Arc::new(SimulatedDevice::new(d.clone(), clock.clone()))))
            .collect();
        let builtin = (1..=config.builtin_workers).map(|i| format!("worker-{i}")).collect();
        let inner = Arc::new(Inner {
            config,
            clock,
            scheduler,
            devices,
            calibrations,
            registry,
            durations,
            builtin,
            channels: Mutex::new(BTreeMap::new()),
            threads: Mutex::new(Vec::new()),
            stop: AtomicBool::new(false),
        });

        for id in &inner.builtin {
            let mut w = WorkerInfo::new(id.clone(), inner.registry.names());
            w.max_parallel = inner.config.worker_parallelism.max(1);
            lock(&inner.scheduler).register_worker(w.clone(), now)?;
        }
        let known: Vec<WorkerInfo> = lock(&inner.scheduler).state().workers.values().cloned().collect();
        for w in known {
            spawn_worker(&inner, &w.worker_id, w.max_parallel);
        }
        for dev in inner.devices.values() {
            if let Err(e) = inner.calibrations.poll(dev.as_ref()) {
                tracing::warn!(error = %e, "initial calibration poll failed");
            }
        }
        let d = inner.clone();
        let handle = std::thread::Builder::new()
            .name("dispatcher".into())
            .spawn(move || dispatcher(d))?;
        lock(&inner.threads).push(handle);
        Ok(Platform { inner })
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.inner.clock
    }

    pub fn config(&self) -> &PlatformConfig {
        &self.inner.config
    }

    pub fn registry(&self) -> &StageRegistry {
        &self.inner.registry
    }

    /// Simulated device behind a backend id, for fault injection.
    pub fn device(&self, backend_id: &str) -> Option<Arc<SimulatedDevice>> {
        self.inner.devices.get(backend_id).cloned()
    }

    /// Read access to scheduler state.
    pub fn with_scheduler<R>(&self, f: impl FnOnce(&Scheduler) -> R) -> R {
        f(&lock(&self.inner.scheduler))
    }

    fn now(&self) -> DateTime<Utc> {
        self.inner.clock.now()
    }

    pub fn submit(&self, descriptor: JobDescriptor) -> Result<String, PlatformError> {
        let now = self.now();
        Ok(lock(&self.inner.scheduler).submit(descriptor, now)?)
    }

    pub fn job(&self, job_id: &str) -> Result<JobRecord, PlatformError> {
        Ok(lock(&self.inner.scheduler).job(job_id)?.clone())
    }

    /// The record together with the expected wait until it starts.
    pub fn job_with_eta(&self, job_id: &str) -> Result<(JobRecord, Option<TimeDelta>), PlatformError> {
        let now = self.now();
        let s = lock(&self.inner.scheduler);
        Ok((s.job(job_id)?.clone(), s.eta(job_id, now)?))
    }

    pub fn cancel(&self, job_id: &str) -> Result<JobStatus, PlatformError> {
        let now = self.now();
        Ok(lock(&self.inner.scheduler).cancel(job_id, now)?)
    }

    /// Blocks until the job is terminal.
    pub fn wait_for(&self, job_id: &str, timeout: Duration) -> Result<JobRecord, PlatformError> {
        let deadline = Instant::now() + timeout;
        loop {
            let job = self.job(job_id)?;
            if job.status.is_terminal() {
                return Ok(job);
            }
            if Instant::now() >= deadline {
                return Err(PlatformError::Timeout(job_id.to_string()));
            }
            std::thread::sleep(Duration::from_millis(5));
        }
    }

    pub fn open_session(&self, user: &str, backend_id: &str, ttl: Option<TimeDelta>) -> Result<Session, PlatformError> {
        let now = self.now();
        Ok(lock(&self.inner.scheduler).open_session(user, backend_id, ttl, now)?)
    }

    pub fn close_session(&self, session_id: &str, user: &str) -> Result<(), PlatformError> {
        let now = self.now();
        Ok(lock(&self.inner.scheduler).close_session(session_id, user, now)?)
    }

    pub fn reserve(
        &self,
        backend_id: &str,
        user: &str,
        start: DateTime<Utc>,
        duration: Option<TimeDelta>,
    ) -> Result<Reservation, PlatformError> {
        let now = self.now();
        Ok(lock(&self.inner.scheduler).reserve(backend_id, user, start, duration, now)?)
    }

    pub fn cancel_reservation(&self, reservation_id: &str, user: &str) -> Result<(), PlatformError> {
        let now = self.now();
        Ok(lock(&self.inner.scheduler).cancel_reservation(reservation_id, user, now)?)
    }

    pub fn backends(&self) -> Vec<BackendStatus> {
        let s = lock(&self.inner.scheduler);
        self.inner
            .devices
            .iter()
            .map(|(id, dev)| BackendStatus {
                backend_id: id.clone(),
                capabilities: dev.capabilities().clone(),
                available: dev.calibration().is_ok(),
                pending_jobs: s
                    .state()
                    .jobs
                    .values()
                    .filter(|j| &j.backend_id == id && j.status.is_active())
                    .count(),
                device_queue: dev.queue_depth(),
                calibration_ts: self.inner.calibrations.latest(id).ok().map(|c| c.timestamp),
            })
            .collect()
    }

    /// Latest snapshot, polled first when `refresh` is set.
    pub fn calibration(&self, backend_id: &str, refresh: bool) -> Result<CalibrationSnapshot, PlatformError> {
        let dev = self
            .inner
            .devices
            .get(backend_id)
            .ok_or_else(|| SchedulerError::UnknownBackend(backend_id.to_string()))?;
        if refresh {
            return Ok(self.inner.calibrations.poll(dev.as_ref())?);
        }
        Ok(self.inner.calibrations.latest(backend_id)?)
    }

    pub fn calibration_history(
        &self,
        backend_id: &str,
        from: DateTime<Utc>,
        to: DateTime<Utc>,
    ) -> Result<Vec<CalibrationSnapshot>, PlatformError> {
        if !self.inner.devices.contains_key(backend_id) {
            return Err(SchedulerError::UnknownBackend(backend_id.to_string()).into());
        }
        Ok(self.inner.calibrations.history(backend_id, from, to))
    }

    /// Registers a worker served by in-process threads. Every stage must be
    /// known to the stage registry.
    pub fn register_worker(&self, worker: WorkerInfo) -> Result<(), PlatformError> {
        if let Some(s) = worker.stages.iter().find(|s| !self.inner.registry.contains(s)) {
            return Err(SchedulerError::CapabilityMissing(s.clone()).into());
        }
        let now = self.now();
        lock(&self.inner.scheduler).register_worker(worker.clone(), now)?;
        spawn_worker(&self.inner, &worker.worker_id, worker.max_parallel);
        Ok(())
    }

    pub fn heartbeat(&self, worker_id: &str) -> Result<(), PlatformError> {
        let now = self.now();
        Ok(lock(&self.inner.scheduler).heartbeat(worker_id, now)?)
    }

    /// Writes a state snapshot at the log head.
    pub fn snapshot(&self) -> Result<u64, PlatformError> {
        Ok(lock(&self.inner.scheduler).snapshot()?)
    }

    /// Stops dispatching, lets workers reach a boundary and joins all threads.
    /// Jobs still running stay RUNNING in the log and continue on next start.
    pub fn shutdown(&self) {
        if self.inner.stop.swap(true, Ordering::SeqCst) {
            return;
        }
        lock(&self.inner.channels).clear();
        let threads: Vec<JoinHandle<()>> = lock(&self.inner.threads).drain(..).collect();
        for t in threads {
            let _ = t.join();
        }
        if self.inner.config.state_dir.is_some() {
            if let Err(e) = lock(&self.inner.scheduler).snapshot() {
                tracing::warn!(error = %e, "final snapshot failed");
            }
        }
    }
}

impl Drop for Platform {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn spawn_worker(inner: &Arc<Inner>, worker_id: &str, parallel: u32) {
    let mut channels = lock(&inner.channels);
    if channels.contains_key(worker_id) || inner.stop.load(Ordering::SeqCst) {
        return;
    }
    let (tx, rx) = mpsc::channel::<String>();
    channels.insert(worker_id.to_string(), tx);
    drop(channels);
    let rx = Arc::new(Mutex::new(rx));
    for slot in 0..parallel.max(1) {
        let (inner2, rx, id) = (inner.clone(), rx.clone(), worker_id.to_string());
        let spawned = std::thread::Builder::new()
            .name(format!("{worker_id}/{slot}"))
            .spawn(move || worker_loop(inner2, id, rx));
        match spawned {
            Ok(h) => lock(&inner.threads).push(h),
            Err(e) => tracing::error!(error = %e, "cannot spawn worker thread"),
        }
    }
}

fn worker_loop(inner: Arc<Inner>, worker_id: String, rx: Arc<Mutex<Receiver<String>>>) {
    while !inner.stop.load(Ordering::SeqCst) {
        let next = lock(&rx).recv_timeout(Duration::from_millis(50));
        match next {
            Ok(job_id) => run_job(&inner, &worker_id, &job_id),
            Err(RecvTimeoutError::Timeout) => {}
            Err(RecvTimeoutError::Disconnected) => return,
        }
    }
}

struct Boundary<'a> {
    inner: &'a Inner,
    job_id: &'a str,
    worker_id: &'a str,
}

impl Boundary<'_> {
    fn record(&self, f: impl FnOnce(&mut Scheduler, DateTime<Utc>) -> Result<(), SchedulerError>) -> Result<Step, RunError> {
        let now = self.inner.clock.now();
        let mut s = lock(&self.inner.scheduler);
        if !s.holds(self.job_id, self.worker_id) {
            return Ok(Step::Stop);
        }
        f(&mut s, now).map_err(|e| RunError::Transient(e.to_string()))?;
        let cancel = s.job(self.job_id).is_ok_and(|j| j.cancel_requested);
        Ok(if cancel || self.inner.stop.load(Ordering::SeqCst) {
            Step::Stop
        } else {
            Step::Continue
        })
    }
}

impl JobObserver for Boundary<'_> {
    fn item_completed(&mut self, result: &ItemResult) -> Result<Step, RunError> {
        self.record(|s, now| s.item_completed(self.job_id, result.clone(), now))
    }

    fn checkpoint(&mut self, checkpoint: &Checkpoint) -> Result<Step, RunError> {
        self.record(|s, now| s.save_checkpoint(self.job_id, checkpoint.clone(), now))
    }
}

fn run_job(inner: &Inner, worker_id: &str, job_id: &str) {
    let started = lock(&inner.scheduler).start(job_id, worker_id, inner.clock.now());
    let record = match started {
        Ok(Some(r)) => r,
        Ok(None) => return,
        Err(e) => {
            tracing::error!(job = job_id, error = %e, "cannot start job");
            return;
        }
    };
    let Some(device) = inner.devices.get(&record.backend_id) else {
        let _ = lock(&inner.scheduler).fail(job_id, "backend left the fleet", inner.clock.now());
        return;
    };
    tracing::info!(job = job_id, worker = worker_id, backend = %record.backend_id, attempt = record.attempts, "running");
    let runner = JobRunner {
        backend: device.as_ref(),
        calibrations: &inner.calibrations,
        registry: &inner.registry,
        durations: &inner.durations,
        clock: inner.clock.as_ref(),
        staleness_limit: inner.config.staleness_limit,
        device_timeout: inner.config.device_timeout,
    };
    let mut observer = Boundary { inner, job_id, worker_id };
    let outcome = runner.run(&record, &mut observer);

    let now = inner.clock.now();
    let mut s = lock(&inner.scheduler);
    if !s.holds(job_id, worker_id) {
        return;
    }
    if let Some(fb) = inner.durations.state().remove(&record.backend_id) {
        if let Err(e) = s.record_feedback(&record.backend_id, fb, now) {
            tracing::warn!(error = %e, "feedback not recorded");
        }
    }
    let cancel = s.job(job_id).is_ok_and(|j| j.cancel_requested);
    let result = match outcome {
        Ok(RunOutcome::Completed(results)) => s.complete(job_id, results, now),
        Ok(RunOutcome::Stopped) if cancel => s.acknowledge_cancel(job_id, now),
        // shutting down: leave the job running for the next start
        Ok(RunOutcome::Stopped) => Ok(()),
        Err(RunError::Transient(e)) => {
            tracing::warn!(job = job_id, error = %e, "attempt failed");
            s.fail_attempt(job_id, &e, now).map(|_| ())
        }
        Err(RunError::Permanent(e)) => {
            tracing::warn!(job = job_id, error = %e, "job failed");
            s.fail(job_id, &e, now)
        }
    };
    if let Err(e) = result {
        tracing::error!(job = job_id, error = %e, "cannot record outcome");
    }
}

fn dispatcher(inner: Arc<Inner>) {
    let mut last_poll: BTreeMap<String, DateTime<Utc>> = BTreeMap::new();
    let mut last_snapshot = lock(&inner.scheduler).log().last_seq();
    let start = inner.clock.now();
    while !inner.stop.load(Ordering::SeqCst) {
        let now = inner.clock.now();
        for (id, dev) in &inner.devices {
            let due = last_poll.get(id).is_none_or(|t| now - *t >= inner.config.poll_interval);
            if due {
                // the first round was polled at start
                if last_poll.contains_key(id) || now - start >= inner.config.poll_interval {
                    if let Err(e) = inner.calibrations.poll(dev.as_ref()) {
                        tracing::warn!(backend = %id, error = %e, "calibration poll failed");
                    }
                }
                last_poll.insert(id.clone(), now);
            }
        }

        let assigned = {
            let mut s = lock(&inner.scheduler);
            for id in &inner.builtin {
                let _ = s.heartbeat(id, now);
            }
            if let Err(e) = s.expire_workers(now) {
                tracing::error!(error = %e, "worker expiry failed");
            }
            let assigned = s.assign(now).unwrap_or_else(|e| {
                tracing::error!(error = %e, "assignment failed");
                Vec::new()
            });
            let head = s.log().last_seq();
            if inner.config.state_dir.is_some() && head - last_snapshot >= inner.config.snapshot_every {
                match s.snapshot() {
                    Ok(seq) => last_snapshot = seq,
                    Err(e) => tracing::warn!(error = %e, "snapshot failed"),
                }
            }
            assigned
        };
        let channels = lock(&inner.channels);
        for a in assigned {
            match channels.get(&a.worker_id) {
                Some(tx) if tx.send(a.job_id.clone()).is_ok() => {}
                _ => tracing::warn!(job = %a.job_id, worker = %a.worker_id, "worker has no runner"),
            }
        }
        drop(channels);
        std::thread::sleep(inner.config.tick);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::{epoch, ManualClock};
    use crate::pipeline::StageSpec;
    use crate::scheduler::{HybridConfig, JobItem, SpsaConfig};

    const BELL: &str = "qreg q[2]; creg c[2]; h q[0]; cx q[0],q[1]; measure q -> c;";
    const RY: &str = "input float theta; qreg q[1]; creg c[1]; ry(theta) q[0]; measure q[0] -> c[0];";

    fn config() -> PlatformConfig {
        PlatformConfig {
            fleet: vec![DeviceConfig::linear("b", 3).ideal()],
            tick: Duration::from_millis(2),
            ..PlatformConfig::default()
        }
    }

    #[test]
    fn runs_a_bell_job() {
        let p = Platform::start(config()).unwrap();
        let id = p.submit(JobDescriptor::single("u", "b", JobItem::new(BELL, 100))).unwrap();
        let job = p.wait_for(&id, Duration::from_secs(10)).unwrap();
        assert_eq!(job.status, JobStatus::Completed);
        let counts = &job.results.unwrap().items[0].counts;
        assert_eq!(counts.get("00") + counts.get("11"), 100);
        assert_eq!(job.attempts, 1);
    }

    #[test]
    fn injected_fault_is_retried() {
        let clock = ManualClock::new(epoch());
        let p = Platform::start_with_clock(config(), Arc::new(clock.clone())).unwrap();
        p.device("b").unwrap().fail_next(1);
        let id = p.submit(JobDescriptor::single("u", "b", JobItem::new(BELL, 10))).unwrap();
        let deadline = Instant::now() + Duration::from_secs(10);
        while p.job(&id).unwrap().attempts < 1 || p.job(&id).unwrap().status != JobStatus::Queued {
            assert!(Instant::now() < deadline, "no retry: {:?}", p.job(&id).unwrap().status);
            std::thread::sleep(Duration::from_millis(2));
        }
        clock.advance(TimeDelta::seconds(3));
        let job = p.wait_for(&id, Duration::from_secs(10)).unwrap();
        assert_eq!(job.status, JobStatus::Completed);
        assert_eq!(job.attempts, 2);
    }

    #[test]
    fn unknown_worker_stage_is_refused() {
        let p = Platform::start(config()).unwrap();
        let err = p.register_worker(WorkerInfo::new("x", ["teleport"])).unwrap_err();
        assert_eq!(err.code(), "CAPABILITY_MISSING");
    }

    #[test]
    fn cancel_running_hybrid_stops_at_boundary() {
        let mut cfg = config();
        cfg.fleet[0].time_dilation_us = 0.2;
        let p = Platform::start(cfg).unwrap();
        let h = HybridConfig {
            initial_params: [("theta".to_string(), 0.1)].into_iter().collect(),
            iterations: 500,
            spsa: SpsaConfig::default(),
            seed: 1,
        };
        let id = p.submit(JobDescriptor::hybrid("u", "b", JobItem::new(RY, 100), h)).unwrap();
        let deadline = Instant::now() + Duration::from_secs(10);
        while p.job(&id).unwrap().checkpoint.is_none() {
            assert!(Instant::now() < deadline);
            std::thread::sleep(Duration::from_millis(2));
        }
        p.cancel(&id).unwrap();
        let job = p.wait_for(&id, Duration::from_secs(10)).unwrap();
        assert_eq!(job.status, JobStatus::Cancelled);
    }

    #[test]
    fn restart_continues_from_state_dir() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config();
        cfg.state_dir = Some(dir.path().to_path_buf());
        cfg.fleet[0].time_dilation_us = 0.5;
        let p = Platform::start(cfg.clone()).unwrap();
        let items = (0..6).map(|_| JobItem::new(BELL, 200).with_stage(StageSpec::named("zne"))).collect();
        let id = p.submit(JobDescriptor::batch("u", "b", items)).unwrap();
        let deadline = Instant::now() + Duration::from_secs(10);
        while p.job(&id).unwrap().partial.is_empty() {
            assert!(Instant::now() < deadline);
            std::thread::sleep(Duration::from_millis(2));
        }
        p.shutdown();
        let done_before = p.job(&id).unwrap().partial.len();
        drop(p);

        let p = Platform::start(cfg).unwrap();
        let job = p.wait_for(&id, Duration::from_secs(20)).unwrap();
        assert_eq!(job.status, JobStatus::Completed);
        assert_eq!(job.results.unwrap().items.len(), 6);
        assert!(done_before >= 1);
        assert_eq!(job.attempts, 1);
    }
}
