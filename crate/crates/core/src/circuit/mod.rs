//! Circuit intermediate representation.
//!
//! Circuits travel between clients, the compiler and the devices as a small,
//! framework-neutral OpenQASM-2-style text format. This module owns the
//! in-memory form of that text: parsing, serialization, late parameter
//! binding and capability checks against a backend.

mod param;
mod parse;
mod serialize;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::transpiler::BackendCapabilities;

pub use param::{Param, ParamBinding};
pub use parse::parse;
pub use serialize::serialize;

/// Serde adapter that stores a circuit as qasm-subset text.
pub mod text {
    use serde::{Deserialize, Deserializer, Serializer};

    use super::Circuit;

    pub fn serialize<S: Serializer>(c: &Circuit, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::serialize(c))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Circuit, D::Error> {
        let text = String::deserialize(d)?;
        super::parse(&text).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CircuitError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("semantic error at {line}:{col}: {message}")]
    Semantic {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("unbound symbol `{0}`")]
    UnboundSymbol(String),
}

impl CircuitError {
    fn semantic(message: impl Into<String>) -> Self {
        CircuitError::Semantic {
            line: 0,
            col: 0,
            message: message.into(),
        }
    }
}

/// Gate vocabulary accepted by the IR.
///
/// `sx` is not part of the client-facing set but it is the native half-X of
/// the compilation basis, so compiled payloads must be expressible too.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gate {
    H,
    X,
    Y,
    Z,
    S,
    Sdg,
    T,
    Tdg,
    Sx,
    Rx,
    Ry,
    Rz,
    Cx,
    Cz,
    Swap,
    Measure,
    Barrier,
}

impl Gate {
    pub const ALL: [Gate; 17] = [
        Gate::H,
        Gate::X,
        Gate::Y,
        Gate::Z,
        Gate::S,
        Gate::Sdg,
        Gate::T,
        Gate::Tdg,
        Gate::Sx,
        Gate::Rx,
        Gate::Ry,
        Gate::Rz,
        Gate::Cx,
        Gate::Cz,
        Gate::Swap,
        Gate::Measure,
        Gate::Barrier,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Gate::H => "h",
            Gate::X => "x",
            Gate::Y => "y",
            Gate::Z => "z",
            Gate::S => "s",
            Gate::Sdg => "sdg",
            Gate::T => "t",
            Gate::Tdg => "tdg",
            Gate::Sx => "sx",
            Gate::Rx => "rx",
            Gate::Ry => "ry",
            Gate::Rz => "rz",
            Gate::Cx => "cx",
            Gate::Cz => "cz",
            Gate::Swap => "swap",
            Gate::Measure => "measure",
            Gate::Barrier => "barrier",
        }
    }

    pub fn from_name(name: &str) -> Option<Gate> {
        Gate::ALL.iter().copied().find(|g| g.name() == name)
    }

    /// Fixed qubit arity, `None` for barrier (any number of qubits).
    pub fn arity(self) -> Option<usize> {
        match self {
            Gate::Cx | Gate::Cz | Gate::Swap => Some(2),
            Gate::Barrier => None,
            _ => Some(1),
        }
    }

    pub fn is_rotation(self) -> bool {
        matches!(self, Gate::Rx | Gate::Ry | Gate::Rz)
    }

    pub fn is_two_qubit(self) -> bool {
        self.arity() == Some(2)
    }

    /// True for gates that act unitarily (everything except measure/barrier).
    pub fn is_unitary(self) -> bool {
        !matches!(self, Gate::Measure | Gate::Barrier)
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instruction {
    pub gate: Gate,
    pub qubits: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<Param>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub clbits: Vec<usize>,
}

impl Instruction {
    pub fn new(gate: Gate, qubits: Vec<usize>) -> Self {
        Instruction {
            gate,
            qubits,
            params: Vec::new(),
            clbits: Vec::new(),
        }
    }

    pub fn rotation(gate: Gate, qubit: usize, param: impl Into<Param>) -> Self {
        Instruction {
            gate,
            qubits: vec![qubit],
            params: vec![param.into()],
            clbits: Vec::new(),
        }
    }

    pub fn measure(qubit: usize, clbit: usize) -> Self {
        Instruction {
            gate: Gate::Measure,
            qubits: vec![qubit],
            params: Vec::new(),
            clbits: vec![clbit],
        }
    }

    /// Angle of a rotation gate whose parameter is already a literal.
    pub fn angle(&self) -> Option<f64> {
        match self.params.first() {
            Some(Param::Literal(v)) => Some(*v),
            _ => None,
        }
    }

    /// Checks gate arity, parameter count and index ranges.
    pub fn check(&self, num_qubits: usize, num_clbits: usize) -> Result<(), String> {
        match self.gate.arity() {
            Some(n) if self.qubits.len() != n => {
                return Err(format!(
                    "gate `{}` expects {n} qubit(s), got {}",
                    self.gate,
                    self.qubits.len()
                ));
            }
            None if self.qubits.is_empty() => {
                return Err("barrier needs at least one qubit".to_string());
            }
            _ => {}
        }
        if let Some(&q) = self.qubits.iter().find(|&&q| q >= num_qubits) {
            return Err(format!("qubit index {q} out of range (register size {num_qubits})"));
        }
        if self.gate.is_two_qubit() && self.qubits[0] == self.qubits[1] {
            return Err(format!("gate `{}` needs two distinct qubits", self.gate));
        }
        let want_params = usize::from(self.gate.is_rotation());
        if self.params.len() != want_params {
            return Err(format!(
                "gate `{}` expects {want_params} parameter(s), got {}",
                self.gate,
                self.params.len()
            ));
        }
        if self.gate == Gate::Measure {
            if self.clbits.len() != 1 {
                return Err("measure maps exactly one qubit to one clbit".to_string());
            }
            if self.clbits[0] >= num_clbits {
                return Err(format!(
                    "clbit index {} out of range (register size {num_clbits})",
                    self.clbits[0]
                ));
            }
        } else if !self.clbits.is_empty() {
            return Err(format!("gate `{}` takes no classical bits", self.gate));
        }
        Ok(())
    }
}

/// A (possibly parametric) circuit over one quantum and one classical register.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Circuit {
    pub num_qubits: usize,
    pub num_clbits: usize,
    pub instructions: Vec<Instruction>,
    pub symbols: BTreeSet<String>,
}

impl Circuit {
    pub fn new(num_qubits: usize, num_clbits: usize) -> Self {
        Circuit {
            num_qubits,
            num_clbits,
            ..Default::default()
        }
    }

    pub fn declare(&mut self, symbol: impl Into<String>) -> &mut Self {
        self.symbols.insert(symbol.into());
        self
    }

    /// Appends an instruction after checking it against the circuit invariants.
    pub fn push(&mut self, instruction: Instruction) -> Result<&mut Self, CircuitError> {
        instruction
            .check(self.num_qubits, self.num_clbits)
            .map_err(CircuitError::semantic)?;
        for p in &instruction.params {
            if let Some(name) = p.symbol() {
                if !self.symbols.contains(name) {
                    return Err(CircuitError::semantic(format!("undeclared symbol `{name}`")));
                }
            }
        }
        self.instructions.push(instruction);
        Ok(self)
    }

    /// Builder-style `push` for circuits assembled in code. Panics on an invalid instruction.
    pub fn with(mut self, instruction: Instruction) -> Self {
        if let Err(e) = self.push(instruction) {
            panic!("invalid instruction: {e}");
        }
        self
    }

    pub fn gate(self, gate: Gate, qubits: &[usize]) -> Self {
        self.with(Instruction::new(gate, qubits.to_vec()))
    }

    pub fn measure_all(mut self) -> Self {
        let n = self.num_qubits.min(self.num_clbits);
        for q in 0..n {
            self = self.with(Instruction::measure(q, q));
        }
        self
    }

    /// Full invariant check, for circuits built by hand or deserialized.
    pub fn check(&self) -> Result<(), CircuitError> {
        for (i, inst) in self.instructions.iter().enumerate() {
            inst.check(self.num_qubits, self.num_clbits)
                .map_err(|m| CircuitError::semantic(format!("instruction {i}: {m}")))?;
            for p in &inst.params {
                if let Some(name) = p.symbol() {
                    if !self.symbols.contains(name) {
                        return Err(CircuitError::semantic(format!(
                            "instruction {i}: undeclared symbol `{name}`"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn is_bound(&self) -> bool {
        self.symbols.is_empty()
    }

    /// (qubit, clbit) pairs of every measurement, in program order.
    pub fn measurements(&self) -> Vec<(usize, usize)> {
        self.instructions
            .iter()
            .filter(|i| i.gate == Gate::Measure)
            .map(|i| (i.qubits[0], i.clbits[0]))
            .collect()
    }

    pub fn measured_qubits(&self) -> BTreeSet<usize> {
        self.measurements().into_iter().map(|(q, _)| q).collect()
    }

    /// Number of unitary gate applications (measure and barrier excluded).
    pub fn gate_count(&self) -> usize {
        self.instructions.iter().filter(|i| i.gate.is_unitary()).count()
    }

    /// Replaces every symbolic parameter by its bound value.
    pub fn bind(&self, binding: &ParamBinding) -> Result<Circuit, CircuitError> {
        if let Some(missing) = self.symbols.iter().find(|s| !binding.values.contains_key(*s)) {
            return Err(CircuitError::UnboundSymbol(missing.clone()));
        }
        let instructions = self
            .instructions
            .iter()
            .map(|inst| {
                let params = inst
                    .params
                    .iter()
                    .map(|p| p.bind(binding).map(Param::Literal))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Instruction {
                    params,
                    ..inst.clone()
                })
            })
            .collect::<Result<Vec<_>, CircuitError>>()?;
        Ok(Circuit {
            num_qubits: self.num_qubits,
            num_clbits: self.num_clbits,
            instructions,
            symbols: BTreeSet::new(),
        })
    }

    pub fn validate(&self, caps: &BackendCapabilities) -> Vec<Violation> {
        validate(self, caps)
    }
}

/// Free-function form of [`Circuit::bind`].
pub fn bind(circuit: &Circuit, binding: &ParamBinding) -> Result<Circuit, CircuitError> {
    circuit.bind(binding)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    TooManyQubits { required: usize, available: usize },
    NonBasisGate { gate: Gate },
    UncoupledPair { a: usize, b: usize },
}

impl Violation {
    /// Blocking violations cannot be repaired by the transpiler.
    pub fn is_blocking(&self) -> bool {
        matches!(self, Violation::TooManyQubits { .. })
    }
}

/// Reports everything that keeps `circuit` from running as-is on a backend.
///
/// Only [`Violation::TooManyQubits`] is blocking; basis and coupling
/// mismatches are listed so callers can see what compilation will rewrite.
pub fn validate(circuit: &Circuit, caps: &BackendCapabilities) -> Vec<Violation> {
    let mut out = Vec::new();
    if circuit.num_qubits > caps.num_qubits {
        out.push(Violation::TooManyQubits {
            required: circuit.num_qubits,
            available: caps.num_qubits,
        });
    }
    let mut seen_gates = BTreeSet::new();
    let mut seen_pairs = BTreeSet::new();
    for inst in &circuit.instructions {
        if inst.gate.is_unitary()
            && !caps.basis_gates.contains(&inst.gate)
            && seen_gates.insert(inst.gate)
        {
            out.push(Violation::NonBasisGate { gate: inst.gate });
        }
        if inst.gate.is_two_qubit() {
            let (a, b) = (inst.qubits[0], inst.qubits[1]);
            let pair = (a.min(b), a.max(b));
            if !caps.is_coupled(a, b) && seen_pairs.insert(pair) {
                out.push(Violation::UncoupledPair { a: pair.0, b: pair.1 });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn caps5() -> BackendCapabilities {
        BackendCapabilities::line("dev", 5)
    }

    #[test]
    fn bind_replaces_symbols() {
        let c = parse("input float theta; qreg q[1]; rz(theta) q[0];").unwrap();
        let b = c.bind(&ParamBinding::from([("theta", 1.25)])).unwrap();
        assert!(b.symbols.is_empty());
        assert_eq!(b.instructions[0].params, vec![Param::Literal(1.25)]);
    }

    #[test]
    fn bind_evaluates_symbol_sum() {
        let c = parse("input float theta; qreg q[1]; rz(theta+0.5) q[0];").unwrap();
        let b = c.bind(&ParamBinding::from([("theta", 1.0)])).unwrap();
        assert_eq!(b.instructions[0].angle(), Some(1.5));
    }

    #[test]
    fn bind_without_symbols_is_identity() {
        let c = parse("qreg q[2]; h q[0]; cx q[0],q[1];").unwrap();
        assert_eq!(c.bind(&ParamBinding::default()).unwrap(), c);
    }

    #[test]
    fn bind_reports_missing_symbol() {
        let c = parse("input float a; input float b; qreg q[1]; rz(a) q[0]; rx(b) q[0];").unwrap();
        let err = c.bind(&ParamBinding::from([("a", 1.0)])).unwrap_err();
        assert_eq!(err, CircuitError::UnboundSymbol("b".into()));
    }

    #[test]
    fn validate_small_circuit_is_clean() {
        let c = parse("qreg q[2]; cx q[0],q[1];").unwrap();
        assert_eq!(c.validate(&caps5()), vec![]);
    }

    #[test]
    fn validate_reports_too_many_qubits() {
        let c = Circuit::new(6, 0);
        assert_eq!(
            c.validate(&caps5()),
            vec![Violation::TooManyQubits { required: 6, available: 5 }]
        );
    }

    #[test]
    fn validate_flags_non_basis_gate_as_transpilable() {
        let c = parse("qreg q[1]; h q[0]; h q[0];").unwrap();
        let v = c.validate(&caps5());
        assert_eq!(v, vec![Violation::NonBasisGate { gate: Gate::H }]);
        assert!(!v[0].is_blocking());
    }

    #[test]
    fn validate_flags_uncoupled_pair() {
        let c = parse("qreg q[3]; cx q[0],q[2];").unwrap();
        assert_eq!(c.validate(&caps5()), vec![Violation::UncoupledPair { a: 0, b: 2 }]);
    }

    #[test]
    fn push_rejects_bad_arity() {
        let mut c = Circuit::new(2, 0);
        assert!(c.push(Instruction::new(Gate::Cx, vec![0])).is_err());
        assert!(c.push(Instruction::new(Gate::Cx, vec![1, 1])).is_err());
        assert!(c.push(Instruction::new(Gate::Rz, vec![0])).is_err());
    }
}
