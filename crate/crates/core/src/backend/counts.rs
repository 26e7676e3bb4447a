use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Histogram of measured bitstrings. Character `i` from the right is clbit `i`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub counts: BTreeMap<String, u64>,
    pub shots: u64,
}

impl Counts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, bitstring: String, n: u64) {
        *self.counts.entry(bitstring).or_default() += n;
        self.shots += n;
    }

    pub fn get(&self, bitstring: &str) -> u64 {
        self.counts.get(bitstring).copied().unwrap_or(0)
    }

    pub fn frequency(&self, bitstring: &str) -> f64 {
        if self.shots == 0 {
            0.0
        } else {
            self.get(bitstring) as f64 / self.shots as f64
        }
    }

    /// Value of clbit `i` in a bitstring.
    pub fn bit(bitstring: &str, i: usize) -> bool {
        let b = bitstring.as_bytes();
        i < b.len() && b[b.len() - 1 - i] == b'1'
    }

    pub fn to_bitstring(value: usize, width: usize) -> String {
        (0..width)
            .rev()
            .map(|i| if value >> i & 1 == 1 { '1' } else { '0' })
            .collect()
    }
}

impl<const N: usize> From<[(&str, u64); N]> for Counts {
    fn from(pairs: [(&str, u64); N]) -> Self {
        let mut c = Counts::new();
        for (k, v) in pairs {
            c.record(k.to_string(), v);
        }
        c
    }
}
