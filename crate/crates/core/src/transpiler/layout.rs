//! Error-aware initial placement of logical qubits.

use std::collections::BTreeMap;

use crate::calibration::CalibrationSnapshot;
use crate::circuit::{Circuit, Gate};

use super::BackendCapabilities;

/// Physical qubit count up to which every injective placement is scored.
pub const EXHAUSTIVE_LIMIT: usize = 6;

/// Logical → physical placement; index is the logical qubit.
pub type Layout = Vec<usize>;

/// Error cost of a two-qubit gate between physical qubits `a` and `b`.
///
/// Coupled pairs cost their own `cx` error. Uncoupled pairs cost the swaps
/// needed to bring them together along the BFS shortest path (three `cx` per
/// hop) plus the final `cx`; disconnected pairs are infinitely expensive.
pub fn pair_cost(caps: &BackendCapabilities, cal: &CalibrationSnapshot, gate: Gate, a: usize, b: usize) -> f64 {
    if caps.is_coupled(a, b) {
        return cal.gate_error(gate, &[a, b]);
    }
    let Some(path) = caps.shortest_path(a, b) else {
        return f64::INFINITY;
    };
    let hops = path.len() - 1;
    let mut cost = 0.0;
    for (i, w) in path.windows(2).enumerate() {
        let e = cal.gate_error(Gate::Cx, &[w[0], w[1]]);
        cost += if i + 1 < hops { 3.0 * e } else { e };
    }
    cost
}

/// Σ gate errors under `layout` plus Σ readout errors of measured qubits.
pub fn layout_score(
    circuit: &Circuit,
    caps: &BackendCapabilities,
    cal: &CalibrationSnapshot,
    layout: &[usize],
) -> f64 {
    let mut score = 0.0;
    for inst in &circuit.instructions {
        if !inst.gate.is_unitary() {
            continue;
        }
        if inst.gate.is_two_qubit() {
            score += pair_cost(caps, cal, inst.gate, layout[inst.qubits[0]], layout[inst.qubits[1]]);
        } else {
            score += cal.gate_error(inst.gate, &[layout[inst.qubits[0]]]);
        }
    }
    for q in circuit.measured_qubits() {
        score += cal.readout_error(layout[q]);
    }
    score
}

/// Picks the placement with the lowest [`layout_score`].
///
/// Devices with at most [`EXHAUSTIVE_LIMIT`] qubits are searched exhaustively
/// in lexicographic order, so the first strict minimum is also the
/// lexicographically smallest one. Larger devices use a greedy placement.
pub fn select_layout(circuit: &Circuit, caps: &BackendCapabilities, cal: &CalibrationSnapshot) -> Layout {
    let n = circuit.num_qubits;
    if n == 0 {
        return Vec::new();
    }
    if caps.num_qubits <= EXHAUSTIVE_LIMIT {
        exhaustive(circuit, caps, cal)
    } else {
        greedy(circuit, caps, cal)
    }
}

fn exhaustive(circuit: &Circuit, caps: &BackendCapabilities, cal: &CalibrationSnapshot) -> Layout {
    let n = circuit.num_qubits;
    let m = caps.num_qubits;
    let mut best: Option<(f64, Layout)> = None;
    let mut current = Vec::with_capacity(n);
    let mut used = vec![false; m];
    fn walk(
        depth: usize,
        n: usize,
        m: usize,
        current: &mut Vec<usize>,
        used: &mut [bool],
        visit: &mut dyn FnMut(&[usize]),
    ) {
        if depth == n {
            visit(current);
            return;
        }
        for p in 0..m {
            if !used[p] {
                used[p] = true;
                current.push(p);
                walk(depth + 1, n, m, current, used, visit);
                current.pop();
                used[p] = false;
            }
        }
    }
    walk(0, n, m, &mut current, &mut used, &mut |layout| {
        let s = layout_score(circuit, caps, cal, layout);
        if best.as_ref().is_none_or(|(b, _)| s < *b) {
            best = Some((s, layout.to_vec()));
        }
    });
    best.map(|(_, l)| l).unwrap_or_else(|| (0..n).collect())
}

fn greedy(circuit: &Circuit, caps: &BackendCapabilities, cal: &CalibrationSnapshot) -> Layout {
    let n = circuit.num_qubits;
    let m = caps.num_qubits;
    let mut weight: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for inst in circuit.instructions.iter().filter(|i| i.gate.is_two_qubit()) {
        let (a, b) = (inst.qubits[0], inst.qubits[1]);
        *weight.entry((a.min(b), a.max(b))).or_default() += 1;
    }
    let mut layout = vec![usize::MAX; n];
    let mut used = vec![false; m];

    if let Some((&(la, lb), _)) = weight.iter().max_by(|x, y| x.1.cmp(y.1).then(y.0.cmp(x.0))) {
        let best_edge = caps
            .coupling
            .iter()
            .copied()
            .min_by(|&x, &y| {
                cal.gate_error(Gate::Cx, &[x.0, x.1])
                    .total_cmp(&cal.gate_error(Gate::Cx, &[y.0, y.1]))
                    .then(x.cmp(&y))
            });
        if let Some((pa, pb)) = best_edge {
            layout[la] = pa;
            layout[lb] = pb;
            used[pa] = true;
            used[pb] = true;
        }
    }

    let one_qubit_cost = |p: usize| cal.gate_error(Gate::Sx, &[p]) + cal.readout_error(p);

    loop {
        // Next logical qubit: strongest interaction with the placed set.
        let mut pick: Option<(usize, usize, usize)> = None; // (weight, logical, partner)
        for (&(a, b), &w) in &weight {
            let (free, placed) = match (layout[a] == usize::MAX, layout[b] == usize::MAX) {
                (true, false) => (a, b),
                (false, true) => (b, a),
                _ => continue,
            };
            if pick.is_none_or(|(pw, pl, _)| w > pw || (w == pw && free < pl)) {
                pick = Some((w, free, placed));
            }
        }
        let Some((_, logical, partner)) = pick else { break };
        let anchor = layout[partner];
        let target = (0..m).filter(|&p| !used[p]).min_by(|&x, &y| {
            let dx = caps.shortest_path(anchor, x).map_or(usize::MAX, |p| p.len());
            let dy = caps.shortest_path(anchor, y).map_or(usize::MAX, |p| p.len());
            dx.cmp(&dy)
                .then(pair_cost(caps, cal, Gate::Cx, anchor, x).total_cmp(&pair_cost(caps, cal, Gate::Cx, anchor, y)))
                .then(x.cmp(&y))
        });
        match target {
            Some(p) => {
                layout[logical] = p;
                used[p] = true;
            }
            None => break,
        }
    }

    for slot in layout.iter_mut().take(n) {
        if *slot != usize::MAX {
            continue;
        }
        if let Some(p) = (0..m)
            .filter(|&p| !used[p])
            .min_by(|&x, &y| one_qubit_cost(x).total_cmp(&one_qubit_cost(y)).then(x.cmp(&y)))
        {
            *slot = p;
            used[p] = true;
        }
    }
    layout
}
