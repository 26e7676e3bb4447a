use std::collections::BTreeSet;
use std::f64::consts::PI;

use crate::circuit::{Circuit, Gate, Instruction, Param};

use super::TranspileError;

fn rz(q: usize, p: Param) -> Instruction {
    Instruction::rotation(Gate::Rz, q, p)
}

fn g1(gate: Gate, q: usize) -> Instruction {
    Instruction::new(gate, vec![q])
}

fn cx(a: usize, b: usize) -> Instruction {
    Instruction::new(Gate::Cx, vec![a, b])
}

fn h_seq(q: usize) -> Vec<Instruction> {
    vec![rz(q, (PI / 2.0).into()), g1(Gate::Sx, q), rz(q, (PI / 2.0).into())]
}

/// Rewrite of one instruction into `{rz, sx, x, cx}`, equal up to global phase.
fn rule(inst: &Instruction) -> Vec<Instruction> {
    let q = inst.qubits[0];
    match inst.gate {
        Gate::H => h_seq(q),
        Gate::X => vec![g1(Gate::X, q)],
        // Y = i·X·Z
        Gate::Y => vec![rz(q, PI.into()), g1(Gate::X, q)],
        Gate::Z => vec![rz(q, PI.into())],
        Gate::S => vec![rz(q, (PI / 2.0).into())],
        Gate::Sdg => vec![rz(q, (-PI / 2.0).into())],
        Gate::T => vec![rz(q, (PI / 4.0).into())],
        Gate::Tdg => vec![rz(q, (-PI / 4.0).into())],
        Gate::Sx => vec![g1(Gate::Sx, q)],
        Gate::Rz => vec![inst.clone()],
        // RX(θ) = H·RZ(θ)·H with the inner frame changes merged.
        Gate::Rx => vec![
            rz(q, (PI / 2.0).into()),
            g1(Gate::Sx, q),
            rz(q, inst.params[0].shifted(PI)),
            g1(Gate::Sx, q),
            rz(q, (PI / 2.0).into()),
        ],
        // RY(θ) = S·RX(θ)·S†
        Gate::Ry => vec![
            g1(Gate::Sx, q),
            rz(q, inst.params[0].shifted(PI)),
            g1(Gate::Sx, q),
            rz(q, PI.into()),
        ],
        Gate::Cx => vec![inst.clone()],
        Gate::Cz => {
            let t = inst.qubits[1];
            let mut v = h_seq(t);
            v.push(cx(q, t));
            v.extend(h_seq(t));
            v
        }
        Gate::Swap => {
            let t = inst.qubits[1];
            vec![cx(q, t), cx(t, q), cx(q, t)]
        }
        Gate::Measure | Gate::Barrier => vec![inst.clone()],
    }
}

/// Rewrites every gate outside `basis` with the fixed rule table.
///
/// Gates already in `basis` are kept as they are. `x` falls back to `sx·sx`
/// when the basis lacks it.
pub fn decompose(circuit: &Circuit, basis: &BTreeSet<Gate>) -> Result<Circuit, TranspileError> {
    let mut out = Circuit {
        instructions: Vec::with_capacity(circuit.instructions.len() * 3),
        ..circuit.clone()
    };
    for inst in &circuit.instructions {
        if !inst.gate.is_unitary() || basis.contains(&inst.gate) {
            out.instructions.push(inst.clone());
            continue;
        }
        let mut expanded = Vec::new();
        for r in rule(inst) {
            if r.gate == Gate::X && !basis.contains(&Gate::X) {
                expanded.push(g1(Gate::Sx, r.qubits[0]));
                expanded.push(g1(Gate::Sx, r.qubits[0]));
            } else {
                expanded.push(r);
            }
        }
        if expanded.iter().any(|r| r.gate.is_unitary() && !basis.contains(&r.gate)) {
            return Err(TranspileError::UnsupportedGate(inst.gate));
        }
        out.instructions.extend(expanded);
    }
    Ok(out)
}

/// Inverse of one instruction as a gate sequence (literal parameters only).
///
/// `sx†` is written as `rz(π)·sx·rz(π)`, which matches up to global phase and
/// stays inside the native basis.
pub fn inverse(inst: &Instruction) -> Option<Vec<Instruction>> {
    let q = inst.qubits.first().copied()?;
    let out = match inst.gate {
        Gate::H | Gate::X | Gate::Y | Gate::Z | Gate::Cx | Gate::Cz | Gate::Swap => vec![inst.clone()],
        Gate::S => vec![g1(Gate::Sdg, q)],
        Gate::Sdg => vec![g1(Gate::S, q)],
        Gate::T => vec![g1(Gate::Tdg, q)],
        Gate::Tdg => vec![g1(Gate::T, q)],
        Gate::Sx => vec![rz(q, PI.into()), g1(Gate::Sx, q), rz(q, PI.into())],
        Gate::Rx | Gate::Ry | Gate::Rz => vec![Instruction::rotation(inst.gate, q, inst.params[0].negated()?)],
        Gate::Measure | Gate::Barrier => return None,
    };
    Some(out)
}
