//! Parse an OpenQASM 3 subset, inspect the IR and bind a parameter.

use qruntime_core::circuit::{parse, serialize, ParamBinding};

fn main() {
    let src = "
        OPENQASM 3.0;
        input float theta;
        qreg q[3];
        creg c[3];
        h q[0];
        cx q[0], q[1];
        ry(theta) q[2];
        measure q -> c;
    ";
    let circuit = parse(src).expect("valid program");
    println!("{} qubits, {} gates, bound: {}", circuit.num_qubits, circuit.gate_count(), circuit.is_bound());
    for inst in &circuit.instructions {
        println!("  {:?} {:?}", inst.gate, inst.qubits);
    }

    let binding: ParamBinding = [("theta".to_string(), 0.75)].into_iter().collect();
    let bound = circuit.bind(&binding).expect("theta is declared");
    println!("\nbound program:\n{}", serialize(&bound));

    match parse("qreg q[1]; cx q[0], q[1];") {
        Ok(_) => unreachable!(),
        Err(e) => println!("rejected: {e}"),
    }
}
