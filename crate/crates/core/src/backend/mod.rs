//! Hardware-adapter contract and the simulated reference devices.

mod counts;
mod device;
mod drift;
mod noise;
mod statevector;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::CalibrationSnapshot;
use crate::transpiler::{BackendCapabilities, ExecutablePayload};

pub use counts::Counts;
pub use device::{DeviceConfig, SimulatedDevice, Topology};
pub use drift::{drift_step, DriftConfig, EPS_MAX, EPS_MIN};
pub use noise::{simulate_counts, NoiseModel};
pub use statevector::{matrix_1q, simulate_statevector, Statevector, MAX_QUBITS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("{0} qubits exceeds the simulator limit of {MAX_QUBITS}")]
    TooLarge(usize),
    #[error("circuit has unbound parameters")]
    Unbound,
    #[error("gate applied to an already measured qubit")]
    MidCircuitMeasurement,
    #[error("shots must be at least 1")]
    NoShots,
    #[error("noise probabilities must lie in [0, 1)")]
    InvalidNoise,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdapterError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("unknown handle {0}")]
    UnknownHandle(u64),
    #[error("results not ready")]
    NotReady,
    #[error("execution failed: {0}")]
    ExecutionFailed(String),
    #[error("payload rejected: {0}")]
    Rejected(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JobHandle(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HandleStatus {
    Waiting,
    Running,
    Done,
    Failed,
}

impl HandleStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, HandleStatus::Done | HandleStatus::Failed)
    }
}

/// Uniform view of a quantum device. Real control stacks plug in here.
pub trait Backend: Send + Sync {
    fn capabilities(&self) -> &BackendCapabilities;

    fn calibration(&self) -> Result<CalibrationSnapshot, AdapterError>;

    fn submit(&self, payload: ExecutablePayload) -> Result<JobHandle, AdapterError>;

    fn status(&self, handle: JobHandle) -> Result<HandleStatus, AdapterError>;

    fn results(&self, handle: JobHandle) -> Result<Counts, AdapterError>;

    /// Payloads waiting or running on the device.
    fn queue_depth(&self) -> usize;

    /// Blocks until the handle is terminal or `timeout` passes.
    fn wait(&self, handle: JobHandle, timeout: Duration) -> Result<HandleStatus, AdapterError> {
        let deadline = Instant::now() + timeout;
        loop {
            let s = self.status(handle)?;
            if s.is_terminal() || Instant::now() >= deadline {
                return Ok(s);
            }
            std::thread::sleep(Duration::from_millis(2));
        }
    }

    /// Device-side execution time, when the adapter reports it.
    fn device_time_ns(&self, _handle: JobHandle) -> Option<u64> {
        None
    }
}

/// Fleet used when no configuration says otherwise: a 5-qubit line and a 7-qubit ring.
pub fn default_fleet() -> Vec<DeviceConfig> {
    vec![
        DeviceConfig::linear("sim-linear-5", 5),
        DeviceConfig::ring("sim-ring-7", 7),
    ]
}
