//! Reference statevector simulator written directly from the gate matrices,
//! kept separate from the library simulator so the two can check each other.
#![allow(dead_code)]

use num_complex::Complex64 as C;
use qruntime_core::circuit::{Circuit, Gate, Instruction};

type M2 = [[C; 2]; 2];

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

pub fn gate_matrix(gate: Gate, theta: f64) -> Option<M2> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let (ch, sh) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let phase = |a: f64| C::from_polar(1.0, a);
    Some(match gate {
        Gate::H => [[c(s, 0.0), c(s, 0.0)], [c(s, 0.0), c(-s, 0.0)]],
        Gate::X => [[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]],
        Gate::Y => [[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]],
        Gate::Z => [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]],
        Gate::S => [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 1.0)]],
        Gate::Sdg => [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, -1.0)]],
        Gate::T => [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), phase(std::f64::consts::FRAC_PI_4)]],
        Gate::Tdg => [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), phase(-std::f64::consts::FRAC_PI_4)]],
        Gate::Sx => [[c(0.5, 0.5), c(0.5, -0.5)], [c(0.5, -0.5), c(0.5, 0.5)]],
        Gate::Rx => [[c(ch, 0.0), c(0.0, -sh)], [c(0.0, -sh), c(ch, 0.0)]],
        Gate::Ry => [[c(ch, 0.0), c(-sh, 0.0)], [c(sh, 0.0), c(ch, 0.0)]],
        Gate::Rz => [[phase(-theta / 2.0), c(0.0, 0.0)], [c(0.0, 0.0), phase(theta / 2.0)]],
        _ => return None,
    })
}

/// Dense unitary of a two-qubit gate in the basis |b a⟩ (a = first operand = low bit).
pub fn two_qubit_matrix(gate: Gate) -> Option<[[C; 4]; 4]> {
    let o = c(1.0, 0.0);
    let z = c(0.0, 0.0);
    Some(match gate {
        // control = low bit
        Gate::Cx => [[o, z, z, z], [z, z, z, o], [z, z, o, z], [z, o, z, z]],
        Gate::Cz => [[o, z, z, z], [z, o, z, z], [z, z, o, z], [z, z, z, -o]],
        Gate::Swap => [[o, z, z, z], [z, z, o, z], [z, o, z, z], [z, z, z, o]],
        _ => return None,
    })
}

pub fn apply(state: &mut [C], inst: &Instruction) {
    match inst.qubits.as_slice() {
        [q] => {
            let Some(m) = gate_matrix(inst.gate, inst.angle().unwrap_or(0.0)) else { return };
            let bit = 1 << q;
            for i in 0..state.len() {
                if i & bit == 0 {
                    let (a, b) = (state[i], state[i | bit]);
                    state[i] = m[0][0] * a + m[0][1] * b;
                    state[i | bit] = m[1][0] * a + m[1][1] * b;
                }
            }
        }
        [qa, qb] if inst.gate.is_two_qubit() => {
            let m = two_qubit_matrix(inst.gate).unwrap();
            let (ba, bb) = (1 << qa, 1 << qb);
            for i in 0..state.len() {
                if i & ba == 0 && i & bb == 0 {
                    let idx = [i, i | ba, i | bb, i | ba | bb];
                    let v: Vec<C> = idx.iter().map(|&k| state[k]).collect();
                    for (r, &k) in idx.iter().enumerate() {
                        state[k] = (0..4).map(|col| m[r][col] * v[col]).sum();
                    }
                }
            }
        }
        _ => {}
    }
}

/// Final state of a bound circuit from |0…0⟩, measurements ignored.
pub fn statevector(circuit: &Circuit) -> Vec<C> {
    let mut s = vec![c(0.0, 0.0); 1 << circuit.num_qubits];
    s[0] = c(1.0, 0.0);
    for inst in &circuit.instructions {
        apply(&mut s, inst);
    }
    s
}

/// Largest amplitude difference after removing the best global phase.
pub fn phase_distance(a: &[C], b: &[C]) -> f64 {
    let overlap: C = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    let phase = if overlap.norm() > 1e-12 { overlap / overlap.norm() } else { c(1.0, 0.0) };
    a.iter().zip(b).map(|(x, y)| (x * phase - y).norm()).fold(0.0, f64::max)
}

/// Embeds a logical state into a larger register: logical qubit `l` sits on
/// physical qubit `perm[l]`, every other physical qubit is |0⟩.
pub fn embed(logical: &[C], perm: &[usize], physical_qubits: usize) -> Vec<C> {
    let mut out = vec![c(0.0, 0.0); 1 << physical_qubits];
    for (i, amp) in logical.iter().enumerate() {
        let mut j = 0;
        for (l, &p) in perm.iter().enumerate() {
            if i >> l & 1 == 1 {
                j |= 1 << p;
            }
        }
        out[j] = *amp;
    }
    out
}
