use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::circuit::Gate;
use crate::transpiler::BackendCapabilities;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitCalibration {
    pub t1_us: f64,
    pub t2_us: f64,
    pub frequency_ghz: f64,
    pub readout_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateCalibration {
    pub gate: Gate,
    pub qubits: Vec<usize>,
    pub error_rate: f64,
    pub duration_ns: u64,
}

/// Device characterization at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSnapshot {
    pub backend_id: String,
    pub timestamp: DateTime<Utc>,
    pub qubits: Vec<QubitCalibration>,
    pub gates: Vec<GateCalibration>,
}

impl CalibrationSnapshot {
    /// Snapshot with the same error figures on every qubit and coupled pair.
    ///
    /// `rz` is treated as a virtual (error-free) frame change.
    pub fn uniform(
        caps: &BackendCapabilities,
        timestamp: DateTime<Utc>,
        error_1q: f64,
        error_2q: f64,
        readout_error: f64,
    ) -> Self {
        let qubits = (0..caps.num_qubits)
            .map(|_| QubitCalibration {
                t1_us: 100.0,
                t2_us: 80.0,
                frequency_ghz: 5.0,
                readout_error,
            })
            .collect();
        let mut gates = Vec::new();
        for q in 0..caps.num_qubits {
            for gate in [Gate::Rz, Gate::Sx, Gate::X] {
                if !caps.basis_gates.contains(&gate) {
                    continue;
                }
                gates.push(GateCalibration {
                    gate,
                    qubits: vec![q],
                    error_rate: if gate == Gate::Rz { 0.0 } else { error_1q },
                    duration_ns: caps.duration_of(gate),
                });
            }
        }
        for &(a, b) in &caps.coupling {
            gates.push(GateCalibration {
                gate: Gate::Cx,
                qubits: vec![a, b],
                error_rate: error_2q,
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

    fn entry(&self, gate: Gate, qubits: &[usize]) -> Option<&GateCalibration> {
        self.gates.iter().find(|g| {
            g.gate == gate
                && match (g.qubits.as_slice(), qubits) {
                    ([a, b], [c, d]) => (a == c && b == d) || (a == d && b == c),
                    (x, y) => x == y,
                }
        })
    }

    /// Error rate ε of `gate` on the given physical qubits.
    ///
    /// Gates without their own entry fall back to the native gate that
    /// implements them: `sx` for single-qubit gates, `cx` for two-qubit ones.
    /// Measure and barrier carry no gate error.
    pub fn gate_error(&self, gate: Gate, qubits: &[usize]) -> f64 {
        if !gate.is_unitary() {
            return 0.0;
        }
        if let Some(e) = self.entry(gate, qubits) {
            return e.error_rate;
        }
        let fallback = if gate.is_two_qubit() { Gate::Cx } else { Gate::Sx };
        self.entry(fallback, qubits).map_or(0.0, |e| e.error_rate)
    }

    pub fn readout_error(&self, qubit: usize) -> f64 {
        self.qubits.get(qubit).map_or(0.0, |q| q.readout_error)
    }

    pub fn set_gate_error(&mut self, gate: Gate, qubits: &[usize], error_rate: f64) {
        let pos = self.gates.iter().position(|g| {
            g.gate == gate
                && match (g.qubits.as_slice(), qubits) {
                    ([a, b], [c, d]) => (a == c && b == d) || (a == d && b == c),
                    (x, y) => x == y,
                }
        });
        match pos {
            Some(i) => self.gates[i].error_rate = error_rate,
            None => self.gates.push(GateCalibration {
                gate,
                qubits: qubits.to_vec(),
                error_rate,
                duration_ns: 1,
            }),
        }
    }

    pub fn set_readout_error(&mut self, qubit: usize, error: f64) {
        if let Some(q) = self.qubits.get_mut(qubit) {
            q.readout_error = error;
        }
    }

    /// Checks the physical plausibility constraints of a snapshot.
    pub fn check(&self) -> Result<(), String> {
        for (i, q) in self.qubits.iter().enumerate() {
            if !(0.0..1.0).contains(&q.readout_error) {
                return Err(format!("qubit {i}: readout_error {} outside [0,1)", q.readout_error));
            }
            if q.t2_us > 2.0 * q.t1_us {
                return Err(format!("qubit {i}: t2 {} exceeds 2*t1 {}", q.t2_us, q.t1_us));
            }
        }
        for g in &self.gates {
            if !(0.0..1.0).contains(&g.error_rate) {
                return Err(format!(
                    "{} on {:?}: error_rate {} outside [0,1)",
                    g.gate, g.qubits, g.error_rate
                ));
            }
        }
        Ok(())
    }
}
