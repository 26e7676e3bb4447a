use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::circuit::Gate;

/// Static description of what a backend can execute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendCapabilities {
    pub backend_id: String,
    pub num_qubits: usize,
    pub basis_gates: BTreeSet<Gate>,
    /// Undirected coupling, stored as `(min, max)` pairs.
    pub coupling: BTreeSet<(usize, usize)>,
    pub gate_durations: BTreeMap<Gate, u64>,
    pub readout_duration_ns: u64,
    pub max_shots: u64,
    pub timing_granularity_ns: u64,
}

pub fn default_basis() -> BTreeSet<Gate> {
    [Gate::Rz, Gate::Sx, Gate::X, Gate::Cx].into_iter().collect()
}

impl BackendCapabilities {
    pub fn new(backend_id: impl Into<String>, num_qubits: usize, edges: &[(usize, usize)]) -> Self {
        BackendCapabilities {
            backend_id: backend_id.into(),
            num_qubits,
            basis_gates: default_basis(),
            coupling: edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect(),
            gate_durations: [
                (Gate::Rz, 1),
                (Gate::Sx, 35),
                (Gate::X, 35),
                (Gate::Cx, 300),
            ]
            .into_iter()
            .collect(),
            readout_duration_ns: 1000,
            max_shots: 100_000,
            timing_granularity_ns: 8,
        }
    }

    /// Qubits coupled in a line `0-1-...-(n-1)`.
    pub fn line(backend_id: impl Into<String>, num_qubits: usize) -> Self {
        let edges: Vec<_> = (1..num_qubits).map(|q| (q - 1, q)).collect();
        Self::new(backend_id, num_qubits, &edges)
    }

    /// Line plus the closing edge `(n-1)-0`.
    pub fn ring(backend_id: impl Into<String>, num_qubits: usize) -> Self {
        let mut edges: Vec<_> = (1..num_qubits).map(|q| (q - 1, q)).collect();
        if num_qubits > 2 {
            edges.push((num_qubits - 1, 0));
        }
        Self::new(backend_id, num_qubits, &edges)
    }

    pub fn is_coupled(&self, a: usize, b: usize) -> bool {
        self.coupling.contains(&(a.min(b), a.max(b)))
    }

    pub fn neighbors(&self, q: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .coupling
            .iter()
            .filter_map(|&(a, b)| {
                if a == q {
                    Some(b)
                } else if b == q {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Shortest path `from ..= to` in the coupling graph; BFS visiting
    /// neighbors in ascending order, so ties resolve deterministically.
    pub fn shortest_path(&self, from: usize, to: usize) -> Option<Vec<usize>> {
        if from >= self.num_qubits || to >= self.num_qubits {
            return None;
        }
        let mut prev = vec![usize::MAX; self.num_qubits];
        let mut seen = vec![false; self.num_qubits];
        let mut queue = VecDeque::from([from]);
        seen[from] = true;
        while let Some(q) = queue.pop_front() {
            if q == to {
                let mut path = vec![to];
                let mut cur = to;
                while cur != from {
                    cur = prev[cur];
                    path.push(cur);
                }
                path.reverse();
                return Some(path);
            }
            for n in self.neighbors(q) {
                if !seen[n] {
                    seen[n] = true;
                    prev[n] = q;
                    queue.push_back(n);
                }
            }
        }
        None
    }

    pub fn duration_of(&self, gate: Gate) -> u64 {
        match gate {
            Gate::Measure => self.readout_duration_ns,
            Gate::Barrier => 0,
            g => self
                .gate_durations
                .get(&g)
                .copied()
                .or_else(|| self.gate_durations.get(&Gate::Sx).copied())
                .unwrap_or(0),
        }
    }

    pub fn check(&self) -> Result<(), String> {
        if let Some(&(a, b)) = self.coupling.iter().find(|(a, b)| *a >= self.num_qubits || *b >= self.num_qubits) {
            return Err(format!("coupling pair ({a},{b}) out of range"));
        }
        if let Some((g, _)) = self.gate_durations.iter().find(|(_, d)| **d == 0) {
            return Err(format!("duration of `{g}` must be positive"));
        }
        if self.readout_duration_ns == 0 {
            return Err("readout duration must be positive".into());
        }
        if self.max_shots == 0 {
            return Err("max_shots must be at least 1".into());
        }
        Ok(())
    }
}
