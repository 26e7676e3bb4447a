use num_complex::Complex64;

use crate::circuit::{Circuit, Gate, Instruction};

use super::SimError;

pub const MAX_QUBITS: usize = 12;

type Mat2 = [[Complex64; 2]; 2];

const fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// 2×2 unitary of a single-qubit gate with literal parameters.
pub fn matrix_1q(gate: Gate, angle: f64) -> Option<Mat2> {
    use std::f64::consts::FRAC_1_SQRT_2 as R;
    let m = match gate {
        Gate::H => [[c(R, 0.0), c(R, 0.0)], [c(R, 0.0), c(-R, 0.0)]],
        Gate::X => [[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]],
        Gate::Y => [[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]],
        Gate::Z => [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]],
        Gate::S => [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 1.0)]],
        Gate::Sdg => [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, -1.0)]],
        Gate::T => [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4)]],
        Gate::Tdg => [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), Complex64::from_polar(1.0, -std::f64::consts::FRAC_PI_4)]],
        Gate::Sx => [[c(0.5, 0.5), c(0.5, -0.5)], [c(0.5, -0.5), c(0.5, 0.5)]],
        Gate::Rx => {
            let (co, si) = ((angle / 2.0).cos(), (angle / 2.0).sin());
            [[c(co, 0.0), c(0.0, -si)], [c(0.0, -si), c(co, 0.0)]]
        }
        Gate::Ry => {
            let (co, si) = ((angle / 2.0).cos(), (angle / 2.0).sin());
            [[c(co, 0.0), c(-si, 0.0)], [c(si, 0.0), c(co, 0.0)]]
        }
        Gate::Rz => [
            [Complex64::from_polar(1.0, -angle / 2.0), c(0.0, 0.0)],
            [c(0.0, 0.0), Complex64::from_polar(1.0, angle / 2.0)],
        ],
        _ => return None,
    };
    Some(m)
}

/// Dense state of `n` qubits; qubit `q` is bit `q` of the basis index.
#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    pub num_qubits: usize,
    pub amplitudes: Vec<Complex64>,
}

impl Statevector {
    pub fn zero(num_qubits: usize) -> Result<Self, SimError> {
        if num_qubits > MAX_QUBITS {
            return Err(SimError::TooLarge(num_qubits));
        }
        let mut amplitudes = vec![c(0.0, 0.0); 1 << num_qubits];
        amplitudes[0] = c(1.0, 0.0);
        Ok(Statevector { num_qubits, amplitudes })
    }

    pub fn apply_matrix(&mut self, q: usize, m: &Mat2) {
        let bit = 1usize << q;
        for i in 0..self.amplitudes.len() {
            if i & bit == 0 {
                let j = i | bit;
                let (a, b) = (self.amplitudes[i], self.amplitudes[j]);
                self.amplitudes[i] = m[0][0] * a + m[0][1] * b;
                self.amplitudes[j] = m[1][0] * a + m[1][1] * b;
            }
        }
    }

    pub fn apply_x(&mut self, q: usize) {
        let bit = 1usize << q;
        for i in 0..self.amplitudes.len() {
            if i & bit == 0 {
                self.amplitudes.swap(i, i | bit);
            }
        }
    }

    pub fn apply_z(&mut self, q: usize) {
        let bit = 1usize << q;
        for (i, a) in self.amplitudes.iter_mut().enumerate() {
            if i & bit != 0 {
                *a = -*a;
            }
        }
    }

    pub fn apply_y(&mut self, q: usize) {
        self.apply_matrix(q, &matrix_1q(Gate::Y, 0.0).expect("y matrix"));
    }

    pub fn apply_cx(&mut self, control: usize, target: usize) {
        let (cb, tb) = (1usize << control, 1usize << target);
        for i in 0..self.amplitudes.len() {
            if i & cb != 0 && i & tb == 0 {
                self.amplitudes.swap(i, i | tb);
            }
        }
    }

    pub fn apply_cz(&mut self, a: usize, b: usize) {
        let mask = (1usize << a) | (1usize << b);
        for (i, amp) in self.amplitudes.iter_mut().enumerate() {
            if i & mask == mask {
                *amp = -*amp;
            }
        }
    }

    pub fn apply_swap(&mut self, a: usize, b: usize) {
        let (ab, bb) = (1usize << a, 1usize << b);
        for i in 0..self.amplitudes.len() {
            if i & ab != 0 && i & bb == 0 {
                self.amplitudes.swap(i, (i & !ab) | bb);
            }
        }
    }

    /// Applies a bound unitary instruction; measure and barrier are no-ops here.
    pub fn apply(&mut self, inst: &Instruction) -> Result<(), SimError> {
        match inst.gate {
            Gate::Measure | Gate::Barrier => {}
            Gate::X => self.apply_x(inst.qubits[0]),
            Gate::Z => self.apply_z(inst.qubits[0]),
            Gate::Cx => self.apply_cx(inst.qubits[0], inst.qubits[1]),
            Gate::Cz => self.apply_cz(inst.qubits[0], inst.qubits[1]),
            Gate::Swap => self.apply_swap(inst.qubits[0], inst.qubits[1]),
            g => {
                let angle = if g.is_rotation() {
                    inst.angle().ok_or(SimError::Unbound)?
                } else {
                    0.0
                };
                let m = matrix_1q(g, angle).ok_or(SimError::Unbound)?;
                self.apply_matrix(inst.qubits[0], &m);
            }
        }
        Ok(())
    }

    /// Pauli `p` (0 = I, 1 = X, 2 = Y, 3 = Z) on qubit `q`.
    pub fn apply_pauli(&mut self, q: usize, p: u8) {
        match p {
            1 => self.apply_x(q),
            2 => self.apply_y(q),
            3 => self.apply_z(q),
            _ => {}
        }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Exact amplitudes of a fully bound circuit run from |0…0⟩.
///
/// Measurements and barriers are ignored; the result is the state right
/// before readout.
pub fn simulate_statevector(circuit: &Circuit) -> Result<Vec<Complex64>, SimError> {
    if !circuit.is_bound() {
        return Err(SimError::Unbound);
    }
    let mut sv = Statevector::zero(circuit.num_qubits)?;
    for inst in &circuit.instructions {
        sv.apply(inst)?;
    }
    Ok(sv.amplitudes)
}
