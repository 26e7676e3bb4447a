//! Reference adapter: a seeded noisy simulator behind a FIFO execution queue.

use std::collections::{BTreeMap, VecDeque};
use std::sync::atomic::{AtomicBool, AtomicU32, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use chrono::{DateTime, TimeDelta, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calibration::{CalibrationSnapshot, GateCalibration, QubitCalibration};
use crate::circuit::Gate;
use crate::clock::Clock;
use crate::transpiler::{BackendCapabilities, ExecutablePayload};

use super::drift::{drift_step, DriftConfig};
use super::noise::{simulate_counts, NoiseModel};
use super::{AdapterError, Backend, Counts, HandleStatus, JobHandle};

/// How long fetched results stay available.
const RESULT_RETENTION: Duration = Duration::from_secs(3600);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Line,
    Ring,
    Edges(Vec<(usize, usize)>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeviceConfig {
    pub id: String,
    pub num_qubits: usize,
    pub topology: Topology,
    pub seed: u64,
    /// Mean single-qubit (`sx`, `x`) error.
    pub error_1q: f64,
    /// Mean `cx` error.
    pub error_2q: f64,
    pub readout_error: f64,
    /// Relative spread of the per-qubit/per-edge figures around the means.
    pub spread: f64,
    pub drift: DriftConfig,
    /// Interval between recalibrations of the simulated device.
    pub drift_period_secs: i64,
    /// Wall-clock microseconds per (ns of estimated duration × shot).
    pub time_dilation_us: f64,
    pub max_job_wall_ms: u64,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        DeviceConfig {
            id: "sim".into(),
            num_qubits: 5,
            topology: Topology::Line,
            seed: 7,
            error_1q: 3e-4,
            error_2q: 1e-2,
            readout_error: 2e-2,
            spread: 0.5,
            drift: DriftConfig::default(),
            drift_period_secs: 60,
            time_dilation_us: 1.0,
            max_job_wall_ms: 2000,
        }
    }
}

impl DeviceConfig {
    pub fn linear(id: impl Into<String>, num_qubits: usize) -> Self {
        DeviceConfig {
            id: id.into(),
            num_qubits,
            topology: Topology::Line,
            ..Default::default()
        }
    }

    pub fn ring(id: impl Into<String>, num_qubits: usize) -> Self {
        DeviceConfig {
            id: id.into(),
            num_qubits,
            topology: Topology::Ring,
            seed: 11,
            ..Default::default()
        }
    }

    /// Noise-free, drift-free and instantaneous; useful for exact tests.
    pub fn ideal(mut self) -> Self {
        self.error_1q = 0.0;
        self.error_2q = 0.0;
        self.readout_error = 0.0;
        self.drift = DriftConfig::frozen();
        self.time_dilation_us = 0.0;
        self
    }

    pub fn capabilities(&self) -> BackendCapabilities {
        match &self.topology {
            Topology::Line => BackendCapabilities::line(&self.id, self.num_qubits),
            Topology::Ring => BackendCapabilities::ring(&self.id, self.num_qubits),
            Topology::Edges(e) => BackendCapabilities::new(&self.id, self.num_qubits, e),
        }
    }

    /// Initial calibration: per-qubit and per-edge figures scattered around the means.
    pub fn initial_calibration(&self, caps: &BackendCapabilities, timestamp: DateTime<Utc>) -> CalibrationSnapshot {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut jitter = |mean: f64| {
            if mean == 0.0 || self.spread == 0.0 {
                mean
            } else {
                (mean * (1.0 + rng.random_range(-self.spread..=self.spread))).clamp(0.0, 0.49)
            }
        };
        let qubits = (0..caps.num_qubits)
            .map(|q| {
                let t1 = 80.0 + 10.0 * (q % 4) as f64;
                QubitCalibration {
                    t1_us: t1,
                    t2_us: 0.8 * t1,
                    frequency_ghz: 4.8 + 0.05 * q as f64,
                    readout_error: jitter(self.readout_error),
                }
            })
            .collect();
        let mut gates = Vec::new();
        for q in 0..caps.num_qubits {
            let e = jitter(self.error_1q);
            gates.push(GateCalibration { gate: Gate::Rz, qubits: vec![q], error_rate: 0.0, duration_ns: caps.duration_of(Gate::Rz) });
            gates.push(GateCalibration { gate: Gate::Sx, qubits: vec![q], error_rate: e, duration_ns: caps.duration_of(Gate::Sx) });
            gates.push(GateCalibration { gate: Gate::X, qubits: vec![q], error_rate: e, duration_ns: caps.duration_of(Gate::X) });
        }
        for &(a, b) in &caps.coupling {
            gates.push(GateCalibration {
                gate: Gate::Cx,
                qubits: vec![a, b],
                error_rate: jitter(self.error_2q),
                duration_ns: caps.duration_of(Gate::Cx),
            });
        }
        CalibrationSnapshot {
            backend_id: caps.backend_id.clone(),
            timestamp,
            qubits,
            gates,
        }
    }
}

struct Entry {
    payload: ExecutablePayload,
    status: HandleStatus,
    counts: Option<Counts>,
    error: Option<String>,
    device_time_ns: Option<u64>,
    fetched_at: Option<Instant>,
}

#[derive(Default)]
struct Queue {
    waiting: VecDeque<JobHandle>,
    running: Option<JobHandle>,
    entries: BTreeMap<JobHandle, Entry>,
    next: u64,
}

struct DriftState {
    snapshot: CalibrationSnapshot,
    steps: u64,
}

struct Inner {
    config: DeviceConfig,
    caps: BackendCapabilities,
    clock: Arc<dyn Clock>,
    epoch: DateTime<Utc>,
    queue: Mutex<Queue>,
    changed: Condvar,
    drift: Mutex<DriftState>,
    available: AtomicBool,
    paused: AtomicBool,
    shutdown: AtomicBool,
    fail_next: AtomicU32,
}

/// Simulated QPU: one executor thread, FIFO queue, drifting calibration.
pub struct SimulatedDevice {
    inner: Arc<Inner>,
    worker: Option<JoinHandle<()>>,
}

impl SimulatedDevice {
    pub fn new(config: DeviceConfig, clock: Arc<dyn Clock>) -> Self {
        let caps = config.capabilities();
        let epoch = clock.now();
        let snapshot = config.initial_calibration(&caps, epoch);
        Self::with_calibration(config, clock, snapshot)
    }

    /// Device whose calibration starts from an explicit snapshot.
    pub fn with_calibration(config: DeviceConfig, clock: Arc<dyn Clock>, snapshot: CalibrationSnapshot) -> Self {
        let caps = config.capabilities();
        let epoch = clock.now();
        let inner = Arc::new(Inner {
            config,
            caps,
            clock,
            epoch,
            queue: Mutex::new(Queue::default()),
            changed: Condvar::new(),
            drift: Mutex::new(DriftState { snapshot, steps: 0 }),
            available: AtomicBool::new(true),
            paused: AtomicBool::new(false),
            shutdown: AtomicBool::new(false),
            fail_next: AtomicU32::new(0),
        });
        let runner = Arc::clone(&inner);
        let worker = std::thread::Builder::new()
            .name(format!("device-{}", inner.config.id))
            .spawn(move || runner.run())
            .expect("spawn device executor");
        SimulatedDevice {
            inner,
            worker: Some(worker),
        }
    }

    pub fn config(&self) -> &DeviceConfig {
        &self.inner.config
    }

    /// Simulates an outage of the control stack.
    pub fn set_available(&self, up: bool) {
        self.inner.available.store(up, Ordering::SeqCst);
    }

    /// Holds queued payloads in `waiting` until resumed.
    pub fn pause(&self) {
        self.inner.paused.store(true, Ordering::SeqCst);
    }

    pub fn resume(&self) {
        self.inner.paused.store(false, Ordering::SeqCst);
        self.inner.changed.notify_all();
    }

    /// Makes the next `n` executions fail.
    pub fn fail_next(&self, n: u32) {
        self.inner.fail_next.store(n, Ordering::SeqCst);
    }

    /// Overrides the current calibration (errors, readout, coherence).
    pub fn set_calibration(&self, snapshot: CalibrationSnapshot) {
        self.inner.drift.lock().unwrap().snapshot = snapshot;
    }

    pub fn current_calibration(&self) -> CalibrationSnapshot {
        self.inner.current_calibration()
    }
}

impl Drop for SimulatedDevice {
    fn drop(&mut self) {
        self.inner.shutdown.store(true, Ordering::SeqCst);
        self.inner.changed.notify_all();
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

impl Inner {
    fn current_calibration(&self) -> CalibrationSnapshot {
        let now = self.clock.now();
        let mut st = self.drift.lock().unwrap();
        let period = self.config.drift_period_secs.max(1);
        let due = ((now - self.epoch).num_seconds().max(0) / period) as u64;
        while st.steps < due {
            st.steps += 1;
            st.snapshot = drift_step(&st.snapshot, &self.config.drift, self.config.seed, st.steps);
            st.snapshot.timestamp = self.epoch + TimeDelta::seconds(period * st.steps as i64);
        }
        st.snapshot.clone()
    }

    fn run(&self) {
        loop {
            let handle = {
                let mut q = self.queue.lock().unwrap();
                loop {
                    if self.shutdown.load(Ordering::SeqCst) {
                        return;
                    }
                    if !self.paused.load(Ordering::SeqCst) {
                        if let Some(h) = q.waiting.pop_front() {
                            q.running = Some(h);
                            if let Some(e) = q.entries.get_mut(&h) {
                                e.status = HandleStatus::Running;
                            }
                            break h;
                        }
                    }
                    q = self.changed.wait_timeout(q, Duration::from_millis(50)).unwrap().0;
                }
            };
            self.changed.notify_all();
            let payload = {
                let q = self.queue.lock().unwrap();
                q.entries.get(&handle).map(|e| e.payload.clone())
            };
            let Some(payload) = payload else { continue };
            let outcome = self.execute(&payload);
            let mut q = self.queue.lock().unwrap();
            q.running = None;
            if let Some(e) = q.entries.get_mut(&handle) {
                match outcome {
                    Ok((counts, t)) => {
                        e.status = HandleStatus::Done;
                        e.counts = Some(counts);
                        e.device_time_ns = Some(t);
                    }
                    Err(msg) => {
                        e.status = HandleStatus::Failed;
                        e.error = Some(msg);
                    }
                }
            }
            drop(q);
            self.changed.notify_all();
        }
    }

    fn execute(&self, payload: &ExecutablePayload) -> Result<(Counts, u64), String> {
        let cal = self.current_calibration();
        let device_time_ns: u64 = payload
            .circuit
            .instructions
            .iter()
            .filter(|i| i.gate.is_unitary())
            .map(|i| {
                cal.gates
                    .iter()
                    .find(|g| g.gate == i.gate && g.qubits.iter().all(|q| i.qubits.contains(q)))
                    .map_or_else(|| self.caps.duration_of(i.gate), |g| g.duration_ns)
            })
            .sum::<u64>()
            .saturating_add(self.caps.readout_duration_ns)
            .saturating_mul(payload.shots);
        let wall_us = payload.estimated_duration_ns as f64 * payload.shots as f64 * self.config.time_dilation_us;
        let wall = Duration::from_micros(wall_us.min(self.config.max_job_wall_ms as f64 * 1000.0) as u64);
        if !wall.is_zero() {
            std::thread::sleep(wall);
        }
        if self
            .fail_next
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
            .is_ok()
        {
            return Err("injected execution fault".into());
        }
        let noise = NoiseModel::from_calibration(&cal);
        let counts = simulate_counts(&payload.circuit, &noise, payload.shots, payload.seed).map_err(|e| e.to_string())?;
        Ok((counts, device_time_ns))
    }

    fn purge(&self, q: &mut Queue) {
        q.entries
            .retain(|_, e| e.fetched_at.is_none_or(|t| t.elapsed() < RESULT_RETENTION));
    }
}

impl Backend for SimulatedDevice {
    fn capabilities(&self) -> &BackendCapabilities {
        &self.inner.caps
    }

    fn calibration(&self) -> Result<CalibrationSnapshot, AdapterError> {
        if !self.inner.available.load(Ordering::SeqCst) {
            return Err(AdapterError::Unavailable(format!("{} is offline", self.inner.config.id)));
        }
        Ok(self.inner.current_calibration())
    }

    fn submit(&self, payload: ExecutablePayload) -> Result<JobHandle, AdapterError> {
        if !self.inner.available.load(Ordering::SeqCst) {
            return Err(AdapterError::Unavailable(format!("{} is offline", self.inner.config.id)));
        }
        let caps = &self.inner.caps;
        if payload.backend_id != caps.backend_id {
            return Err(AdapterError::Rejected(format!(
                "payload targets `{}`, this is `{}`",
                payload.backend_id, caps.backend_id
            )));
        }
        if payload.shots == 0 || payload.shots > caps.max_shots {
            return Err(AdapterError::Rejected(format!("{} shots outside [1, {}]", payload.shots, caps.max_shots)));
        }
        if payload.circuit.num_qubits > caps.num_qubits || !payload.circuit.is_bound() {
            return Err(AdapterError::Rejected("circuit not executable on this device".into()));
        }
        for inst in &payload.circuit.instructions {
            if inst.gate.is_unitary() && !caps.basis_gates.contains(&inst.gate) {
                return Err(AdapterError::Rejected(format!("non-native gate `{}`", inst.gate)));
            }
            if inst.gate.is_two_qubit() && !caps.is_coupled(inst.qubits[0], inst.qubits[1]) {
                return Err(AdapterError::Rejected(format!(
                    "qubits {} and {} are not coupled",
                    inst.qubits[0], inst.qubits[1]
                )));
            }
        }
        let mut q = self.inner.queue.lock().unwrap();
        self.inner.purge(&mut q);
        q.next += 1;
        let handle = JobHandle(q.next);
        q.entries.insert(
            handle,
            Entry {
                payload,
                status: HandleStatus::Waiting,
                counts: None,
                error: None,
                device_time_ns: None,
                fetched_at: None,
            },
        );
        q.waiting.push_back(handle);
        drop(q);
        self.inner.changed.notify_all();
        Ok(handle)
    }

    fn status(&self, handle: JobHandle) -> Result<HandleStatus, AdapterError> {
        let q = self.inner.queue.lock().unwrap();
        q.entries
            .get(&handle)
            .map(|e| e.status)
            .ok_or(AdapterError::UnknownHandle(handle.0))
    }

    fn results(&self, handle: JobHandle) -> Result<Counts, AdapterError> {
        let mut q = self.inner.queue.lock().unwrap();
        let e = q.entries.get_mut(&handle).ok_or(AdapterError::UnknownHandle(handle.0))?;
        match e.status {
            HandleStatus::Done => {
                e.fetched_at.get_or_insert_with(Instant::now);
                Ok(e.counts.clone().expect("done entries carry counts"))
            }
            HandleStatus::Failed => Err(AdapterError::ExecutionFailed(e.error.clone().unwrap_or_default())),
            _ => Err(AdapterError::NotReady),
        }
    }

    fn queue_depth(&self) -> usize {
        let q = self.inner.queue.lock().unwrap();
        q.waiting.len() + usize::from(q.running.is_some())
    }

    fn wait(&self, handle: JobHandle, timeout: Duration) -> Result<HandleStatus, AdapterError> {
        let deadline = Instant::now() + timeout;
        let mut q = self.inner.queue.lock().unwrap();
        loop {
            let status = q
                .entries
                .get(&handle)
                .map(|e| e.status)
                .ok_or(AdapterError::UnknownHandle(handle.0))?;
            if status.is_terminal() {
                return Ok(status);
            }
            let now = Instant::now();
            if now >= deadline {
                return Ok(status);
            }
            q = self.inner.changed.wait_timeout(q, deadline - now).unwrap().0;
        }
    }

    fn device_time_ns(&self, handle: JobHandle) -> Option<u64> {
        let q = self.inner.queue.lock().unwrap();
        q.entries.get(&handle).and_then(|e| e.device_time_ns)
    }
}
