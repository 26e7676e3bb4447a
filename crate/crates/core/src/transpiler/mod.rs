//! Parametric compilation.
//!
//! A circuit is decomposed, placed and routed once into a
//! [`CompiledTemplate`]. Each execution then only binds parameter values
//! against the freshest calibration snapshot, producing an
//! [`ExecutablePayload`] stamped with the calibration it was bound against.

mod caps;
mod decompose;
mod feedback;
mod layout;
mod route;

use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};
use std::sync::Arc;

use chrono::{DateTime, TimeDelta, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::CalibrationSnapshot;
use crate::circuit::{self, Circuit, CircuitError, Gate, ParamBinding, Violation};

pub use caps::{default_basis, BackendCapabilities};
pub use decompose::{decompose, inverse};
pub use feedback::{record_feedback, BackendFeedback, DurationModel, Observation, FEEDBACK_ALPHA};
pub use layout::{layout_score, pair_cost, select_layout, Layout, EXHAUSTIVE_LIMIT};
pub use route::{route, Routed};

pub const DEFAULT_STALENESS_LIMIT: TimeDelta = TimeDelta::seconds(300);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TranspileError {
    #[error("no decomposition rule for gate `{0}` into the target basis")]
    UnsupportedGate(Gate),
    #[error("physical qubits {0} and {1} are not connected")]
    DisconnectedQubits(usize, usize),
    #[error("circuit needs {required} qubits, backend has {available}")]
    TooManyQubits { required: usize, available: usize },
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error("calibration is {age_ms} ms old (limit {limit_ms} ms)")]
    StaleCalibration { age_ms: i64, limit_ms: i64 },
    #[error("calibration moved {drift_ms} ms away from the layout calibration; recompile")]
    RecompileRequired { drift_ms: i64 },
    #[error("calibration is for `{got}`, template targets `{want}`")]
    BackendMismatch { want: String, got: String },
    #[error("{shots} shots outside [1, {max}]")]
    ShotsOutOfRange { shots: u64, max: u64 },
}

/// Bind-time rotation-angle adjustment: `(physical qubit, angle, calibration) -> angle`.
pub type AngleAdjust = Arc<dyn Fn(usize, f64, &CalibrationSnapshot) -> f64 + Send + Sync>;

/// A routed, basis-only circuit that may still carry symbolic parameters.
pub struct CompiledTemplate {
    pub template_id: String,
    pub backend_id: String,
    pub source: Circuit,
    pub routed: Circuit,
    pub layout: Layout,
    pub output_permutation: Vec<usize>,
    pub layout_calibration_ts: DateTime<Utc>,
    caps: BackendCapabilities,
    angle_adjust: Option<AngleAdjust>,
    compile_count: AtomicU32,
    bind_count: AtomicU64,
}

impl fmt::Debug for CompiledTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CompiledTemplate")
            .field("template_id", &self.template_id)
            .field("backend_id", &self.backend_id)
            .field("layout", &self.layout)
            .field("output_permutation", &self.output_permutation)
            .field("layout_calibration_ts", &self.layout_calibration_ts)
            .field("compile_count", &self.compile_count())
            .field("bind_count", &self.bind_count())
            .finish_non_exhaustive()
    }
}

fn template_id(source: &Circuit, backend_id: &str) -> String {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    circuit::serialize(source).hash(&mut h);
    backend_id.hash(&mut h);
    format!("tpl-{:016x}", h.finish())
}

struct Compiled {
    routed: Circuit,
    layout: Layout,
    output_permutation: Vec<usize>,
}

fn compile_parts(
    circuit: &Circuit,
    caps: &BackendCapabilities,
    cal: &CalibrationSnapshot,
) -> Result<Compiled, TranspileError> {
    if let Some(Violation::TooManyQubits { required, available }) =
        circuit.validate(caps).into_iter().find(Violation::is_blocking)
    {
        return Err(TranspileError::TooManyQubits { required, available });
    }
    let basis_only = decompose(circuit, &caps.basis_gates)?;
    let layout = select_layout(&basis_only, caps, cal);
    let routed = route(&basis_only, caps, &layout)?;
    Ok(Compiled {
        routed: routed.circuit,
        layout,
        output_permutation: routed.output_permutation,
    })
}

/// decompose → select_layout → route, keeping symbols for late binding.
pub fn compile_template(
    circuit: &Circuit,
    caps: &BackendCapabilities,
    cal: &CalibrationSnapshot,
) -> Result<CompiledTemplate, TranspileError> {
    let parts = compile_parts(circuit, caps, cal)?;
    tracing::debug!(backend = %caps.backend_id, layout = ?parts.layout, "compiled template");
    Ok(CompiledTemplate {
        template_id: template_id(circuit, &caps.backend_id),
        backend_id: caps.backend_id.clone(),
        source: circuit.clone(),
        routed: parts.routed,
        layout: parts.layout,
        output_permutation: parts.output_permutation,
        layout_calibration_ts: cal.timestamp,
        caps: caps.clone(),
        angle_adjust: None,
        compile_count: AtomicU32::new(1),
        bind_count: AtomicU64::new(0),
    })
}

/// Knobs of a single late binding.
#[derive(Debug, Clone, Copy)]
pub struct BindRequest {
    pub shots: u64,
    pub now: DateTime<Utc>,
    pub staleness_limit: TimeDelta,
    pub seed: u64,
}

impl CompiledTemplate {
    pub fn compile_count(&self) -> u32 {
        self.compile_count.load(Ordering::SeqCst)
    }

    pub fn bind_count(&self) -> u64 {
        self.bind_count.load(Ordering::SeqCst)
    }

    pub fn capabilities(&self) -> &BackendCapabilities {
        &self.caps
    }

    pub fn with_angle_adjust(mut self, adjust: AngleAdjust) -> Self {
        self.angle_adjust = Some(adjust);
        self
    }

    /// Re-runs placement and routing against a newer calibration.
    pub fn recompile(&mut self, cal: &CalibrationSnapshot) -> Result<(), TranspileError> {
        let parts = compile_parts(&self.source, &self.caps, cal)?;
        self.routed = parts.routed;
        self.layout = parts.layout;
        self.output_permutation = parts.output_permutation;
        self.layout_calibration_ts = cal.timestamp;
        self.compile_count.fetch_add(1, Ordering::SeqCst);
        Ok(())
    }

    /// Late binding against the freshest calibration snapshot.
    ///
    /// Fails with [`TranspileError::StaleCalibration`] when the snapshot is
    /// older than the staleness limit, and with
    /// [`TranspileError::RecompileRequired`] when the snapshot is too far from
    /// the one the layout was chosen with.
    pub fn bind_with_calibration(
        &self,
        binding: &ParamBinding,
        cal: &CalibrationSnapshot,
        req: BindRequest,
    ) -> Result<ExecutablePayload, TranspileError> {
        if cal.backend_id != self.backend_id {
            return Err(TranspileError::BackendMismatch {
                want: self.backend_id.clone(),
                got: cal.backend_id.clone(),
            });
        }
        if req.shots == 0 || req.shots > self.caps.max_shots {
            return Err(TranspileError::ShotsOutOfRange {
                shots: req.shots,
                max: self.caps.max_shots,
            });
        }
        let age = req.now - cal.timestamp;
        if age > req.staleness_limit {
            return Err(TranspileError::StaleCalibration {
                age_ms: age.num_milliseconds(),
                limit_ms: req.staleness_limit.num_milliseconds(),
            });
        }
        let drift = (cal.timestamp - self.layout_calibration_ts).abs();
        if drift > req.staleness_limit {
            return Err(TranspileError::RecompileRequired {
                drift_ms: drift.num_milliseconds(),
            });
        }

        let mut bound = self.routed.bind(binding)?;
        if let Some(adjust) = &self.angle_adjust {
            for inst in bound.instructions.iter_mut().filter(|i| i.gate == Gate::Rz) {
                if let Some(angle) = inst.angle() {
                    inst.params[0] = adjust(inst.qubits[0], angle, cal).into();
                }
            }
        }
        self.bind_count.fetch_add(1, Ordering::SeqCst);
        Ok(ExecutablePayload {
            estimated_duration_ns: estimate_duration_ns(&bound, &self.caps),
            estimated_fidelity: estimate_fidelity(&bound, cal),
            circuit: bound,
            backend_id: self.backend_id.clone(),
            shots: req.shots,
            calibration_ts: cal.timestamp,
            template_id: self.template_id.clone(),
            seed: req.seed,
        })
    }
}

/// Fully bound, calibration-stamped unit of work for one device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutablePayload {
    #[serde(with = "circuit::text")]
    pub circuit: Circuit,
    pub backend_id: String,
    pub shots: u64,
    pub calibration_ts: DateTime<Utc>,
    pub estimated_duration_ns: u64,
    pub estimated_fidelity: f64,
    pub template_id: String,
    pub seed: u64,
}

impl ExecutablePayload {
    /// Same payload with a different circuit (e.g. a folded variant).
    pub fn with_circuit(&self, circuit: Circuit, caps: &BackendCapabilities, cal: &CalibrationSnapshot) -> Self {
        ExecutablePayload {
            estimated_duration_ns: estimate_duration_ns(&circuit, caps),
            estimated_fidelity: estimate_fidelity(&circuit, cal),
            circuit,
            ..self.clone()
        }
    }
}

/// Σ gate durations + readout, rounded up to the timing granularity.
pub fn estimate_duration_ns(circuit: &Circuit, caps: &BackendCapabilities) -> u64 {
    let gates: u64 = circuit
        .instructions
        .iter()
        .filter(|i| i.gate.is_unitary())
        .map(|i| caps.duration_of(i.gate))
        .sum();
    let total = gates + caps.readout_duration_ns;
    let g = caps.timing_granularity_ns.max(1);
    total.div_ceil(g) * g
}

/// First-order success probability: Π(1−ε) over gates × Π(1−readout) over measured qubits.
pub fn estimate_fidelity(circuit: &Circuit, cal: &CalibrationSnapshot) -> f64 {
    let gates: f64 = circuit
        .instructions
        .iter()
        .filter(|i| i.gate.is_unitary())
        .map(|i| 1.0 - cal.gate_error(i.gate, &i.qubits))
        .product();
    let readout: f64 = circuit
        .measured_qubits()
        .into_iter()
        .map(|q| 1.0 - cal.readout_error(q))
        .product();
    gates * readout
}
