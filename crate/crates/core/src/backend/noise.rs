use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationSnapshot;
use crate::circuit::{Circuit, Gate, Instruction};

use super::statevector::{Statevector, MAX_QUBITS};
use super::{Counts, SimError};

/// Depolarizing probability per gate application plus per-qubit readout flips.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseModel {
    calibration: Option<CalibrationSnapshot>,
    /// Uniform depolarizing probability applied to every unitary gate.
    uniform_depolarizing: Option<f64>,
    readout: BTreeMap<usize, f64>,
}

impl NoiseModel {
    pub fn ideal() -> Self {
        Self::default()
    }

    /// Gate and readout errors taken from a calibration snapshot.
    pub fn from_calibration(cal: &CalibrationSnapshot) -> Self {
        NoiseModel {
            readout: cal
                .qubits
                .iter()
                .enumerate()
                .filter(|(_, q)| q.readout_error > 0.0)
                .map(|(i, q)| (i, q.readout_error))
                .collect(),
            calibration: Some(cal.clone()),
            uniform_depolarizing: None,
        }
    }

    pub fn with_depolarizing(mut self, p: f64) -> Self {
        self.uniform_depolarizing = Some(p);
        self
    }

    pub fn with_readout(mut self, qubit: usize, flip: f64) -> Self {
        self.readout.insert(qubit, flip);
        self
    }

    pub fn gate_probability(&self, inst: &Instruction) -> f64 {
        if !inst.gate.is_unitary() {
            return 0.0;
        }
        if let Some(p) = self.uniform_depolarizing {
            return p;
        }
        self.calibration
            .as_ref()
            .map_or(0.0, |c| c.gate_error(inst.gate, &inst.qubits))
    }

    pub fn readout_flip(&self, qubit: usize) -> f64 {
        self.readout.get(&qubit).copied().unwrap_or(0.0)
    }

    pub fn check(&self) -> Result<(), SimError> {
        let bad = |p: f64| !(0.0..1.0).contains(&p);
        if self.uniform_depolarizing.is_some_and(bad) || self.readout.values().any(|&p| bad(p)) {
            return Err(SimError::InvalidNoise);
        }
        Ok(())
    }
}

/// Samples `shots` measurement outcomes.
///
/// Gate noise uses the trajectory method: after each gate, with probability
/// `p_g` a uniformly random non-identity Pauli hits the gate's qubits. Each
/// measured bit is then flipped with its readout error. Fixed seed, fixed output.
pub fn simulate_counts(circuit: &Circuit, noise: &NoiseModel, shots: u64, seed: u64) -> Result<Counts, SimError> {
    if !circuit.is_bound() {
        return Err(SimError::Unbound);
    }
    if circuit.num_qubits > MAX_QUBITS {
        return Err(SimError::TooLarge(circuit.num_qubits));
    }
    if shots == 0 {
        return Err(SimError::NoShots);
    }
    noise.check()?;

    // Measurements are deferred to the end; nothing may touch a measured qubit afterwards.
    let mut measured = vec![false; circuit.num_qubits];
    let mut unitary = Vec::new();
    let mut readout_map: Vec<(usize, usize)> = Vec::new();
    for inst in &circuit.instructions {
        match inst.gate {
            Gate::Measure => {
                measured[inst.qubits[0]] = true;
                readout_map.retain(|&(_, c)| c != inst.clbits[0]);
                readout_map.push((inst.qubits[0], inst.clbits[0]));
            }
            Gate::Barrier => {}
            _ => {
                if inst.qubits.iter().any(|&q| measured[q]) {
                    return Err(SimError::MidCircuitMeasurement);
                }
                unitary.push((inst, noise.gate_probability(inst)));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = Counts::new();
    let width = circuit.num_clbits;
    let flips: Vec<f64> = readout_map.iter().map(|&(q, _)| noise.readout_flip(q)).collect();

    let record = |rng: &mut ChaCha8Rng, basis_index: usize, counts: &mut Counts| {
        let mut value = 0usize;
        for (k, &(q, c)) in readout_map.iter().enumerate() {
            let mut bit = basis_index >> q & 1 == 1;
            if flips[k] > 0.0 && rng.random::<f64>() < flips[k] {
                bit = !bit;
            }
            if bit {
                value |= 1 << c;
            }
        }
        counts.record(Counts::to_bitstring(value, width), 1);
    };

    let noisy = unitary.iter().any(|(_, p)| *p > 0.0);
    if !noisy {
        let mut sv = Statevector::zero(circuit.num_qubits)?;
        for (inst, _) in &unitary {
            sv.apply(inst)?;
        }
        let cdf = cumulative(&sv.probabilities());
        for _ in 0..shots {
            let idx = sample(&cdf, rng.random::<f64>());
            record(&mut rng, idx, &mut counts);
        }
        return Ok(counts);
    }

    let mut sv = Statevector::zero(circuit.num_qubits)?;
    for _ in 0..shots {
        sv.amplitudes.iter_mut().for_each(|a| *a = num_complex::Complex64::new(0.0, 0.0));
        sv.amplitudes[0] = num_complex::Complex64::new(1.0, 0.0);
        for (inst, p) in &unitary {
            sv.apply(inst)?;
            if *p > 0.0 && rng.random::<f64>() < *p {
                match inst.qubits.as_slice() {
                    [q] => sv.apply_pauli(*q, rng.random_range(1..4u8)),
                    [a, b] => {
                        let k = rng.random_range(1..16u8);
                        sv.apply_pauli(*a, k % 4);
                        sv.apply_pauli(*b, k / 4);
                    }
                    _ => {}
                }
            }
        }
        let cdf = cumulative(&sv.probabilities());
        let idx = sample(&cdf, rng.random::<f64>());
        record(&mut rng, idx, &mut counts);
    }
    Ok(counts)
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    p.iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect()
}

fn sample(cdf: &[f64], u: f64) -> usize {
    let total = cdf.last().copied().unwrap_or(1.0);
    let target = u * total;
    cdf.partition_point(|&c| c <= target).min(cdf.len() - 1)
}
