use crate::circuit::{Circuit, Gate, Instruction};

use super::{BackendCapabilities, TranspileError};

#[derive(Debug, Clone, PartialEq)]
pub struct Routed {
    /// Circuit over the device's physical qubits.
    pub circuit: Circuit,
    /// Final physical position of every logical qubit.
    pub output_permutation: Vec<usize>,
}

fn cx(a: usize, b: usize) -> Instruction {
    Instruction::new(Gate::Cx, vec![a, b])
}

/// Maps a basis-gate circuit onto physical qubits, inserting swaps (as `cx`
/// triples) along the shortest coupling path whenever a two-qubit gate hits
/// an uncoupled pair. The control qubit travels toward the target.
///
/// Measurements follow their logical qubit, so classical bits keep their
/// logical meaning.
pub fn route(circuit: &Circuit, caps: &BackendCapabilities, layout: &[usize]) -> Result<Routed, TranspileError> {
    if layout.len() != circuit.num_qubits {
        return Err(TranspileError::InvalidLayout(format!(
            "layout covers {} qubits, circuit has {}",
            layout.len(),
            circuit.num_qubits
        )));
    }
    let m = caps.num_qubits;
    let mut phys_of: Vec<usize> = layout.to_vec();
    let mut logical_at: Vec<Option<usize>> = vec![None; m];
    for (l, &p) in layout.iter().enumerate() {
        if p >= m || logical_at[p].is_some() {
            return Err(TranspileError::InvalidLayout(format!("physical qubit {p} invalid or reused")));
        }
        logical_at[p] = Some(l);
    }

    let mut out = Circuit {
        num_qubits: m,
        num_clbits: circuit.num_clbits,
        instructions: Vec::with_capacity(circuit.instructions.len()),
        symbols: circuit.symbols.clone(),
    };

    for inst in &circuit.instructions {
        if inst.gate.is_two_qubit() {
            let (la, lb) = (inst.qubits[0], inst.qubits[1]);
            if !caps.is_coupled(phys_of[la], phys_of[lb]) {
                let path = caps
                    .shortest_path(phys_of[la], phys_of[lb])
                    .ok_or(TranspileError::DisconnectedQubits(phys_of[la], phys_of[lb]))?;
                for w in path[..path.len() - 1].windows(2) {
                    let (p, next) = (w[0], w[1]);
                    out.instructions.extend([cx(p, next), cx(next, p), cx(p, next)]);
                    let (lp, ln) = (logical_at[p], logical_at[next]);
                    logical_at[p] = ln;
                    logical_at[next] = lp;
                    if let Some(l) = lp {
                        phys_of[l] = next;
                    }
                    if let Some(l) = ln {
                        phys_of[l] = p;
                    }
                }
            }
        }
        let mut mapped = inst.clone();
        for q in &mut mapped.qubits {
            *q = phys_of[*q];
        }
        out.instructions.push(mapped);
    }

    Ok(Routed {
        circuit: out,
        output_permutation: phys_of,
    })
}
