use std::fmt::Write;

use super::{Circuit, Gate};

/// Renders a circuit as qasm-subset text that [`super::parse`] reads back unchanged.
pub fn serialize(circuit: &Circuit) -> String {
    let mut out = String::from("OPENQASM 2.0;\n");
    for s in &circuit.symbols {
        let _ = writeln!(out, "input float {s};");
    }
    let _ = writeln!(out, "qreg q[{}];", circuit.num_qubits);
    if circuit.num_clbits > 0 {
        let _ = writeln!(out, "creg c[{}];", circuit.num_clbits);
    }
    for inst in &circuit.instructions {
        match inst.gate {
            Gate::Measure => {
                let _ = writeln!(out, "measure q[{}] -> c[{}];", inst.qubits[0], inst.clbits[0]);
            }
            gate => {
                out.push_str(gate.name());
                if !inst.params.is_empty() {
                    let ps: Vec<String> = inst.params.iter().map(ToString::to_string).collect();
                    let _ = write!(out, "({})", ps.join(", "));
                }
                let qs: Vec<String> = inst.qubits.iter().map(|q| format!("q[{q}]")).collect();
                let _ = writeln!(out, " {};", qs.join(","));
            }
        }
    }
    out
}

impl std::fmt::Display for Circuit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&serialize(self))
    }
}
