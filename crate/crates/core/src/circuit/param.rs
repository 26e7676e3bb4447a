use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::CircuitError;

/// Gate parameter: a literal angle in radians or `symbol + offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Param {
    Literal(f64),
    Symbol { symbol: String, offset: f64 },
}

impl Param {
    pub fn symbol(&self) -> Option<&str> {
        match self {
            Param::Literal(_) => None,
            Param::Symbol { symbol, .. } => Some(symbol),
        }
    }

    pub fn sym(name: impl Into<String>) -> Param {
        Param::Symbol {
            symbol: name.into(),
            offset: 0.0,
        }
    }

    pub fn bind(&self, binding: &ParamBinding) -> Result<f64, CircuitError> {
        match self {
            Param::Literal(v) => Ok(*v),
            Param::Symbol { symbol, offset } => binding
                .values
                .get(symbol)
                .map(|v| v + offset)
                .ok_or_else(|| CircuitError::UnboundSymbol(symbol.clone())),
        }
    }

    /// Negated parameter, defined for literals only.
    pub fn negated(&self) -> Option<Param> {
        match self {
            Param::Literal(v) => Some(Param::Literal(-v)),
            Param::Symbol { .. } => None,
        }
    }

    /// Adds a literal to the parameter, keeping symbolic form when present.
    pub fn shifted(&self, delta: f64) -> Param {
        match self {
            Param::Literal(v) => Param::Literal(v + delta),
            Param::Symbol { symbol, offset } => Param::Symbol {
                symbol: symbol.clone(),
                offset: offset + delta,
            },
        }
    }
}

impl From<f64> for Param {
    fn from(v: f64) -> Self {
        Param::Literal(v)
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Param::Literal(v) => write!(f, "{v}"),
            Param::Symbol { symbol, offset } if *offset == 0.0 => f.write_str(symbol),
            Param::Symbol { symbol, offset } if *offset < 0.0 => write!(f, "{symbol} - {}", -offset),
            Param::Symbol { symbol, offset } => write!(f, "{symbol} + {offset}"),
        }
    }
}

/// Values for the symbolic parameters of a circuit, in radians.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamBinding {
    pub values: BTreeMap<String, f64>,
}

impl ParamBinding {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, name: impl Into<String>, value: f64) -> &mut Self {
        self.values.insert(name.into(), value);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl<K: Into<String>, const N: usize> From<[(K, f64); N]> for ParamBinding {
    fn from(pairs: [(K, f64); N]) -> Self {
        ParamBinding {
            values: pairs.into_iter().map(|(k, v)| (k.into(), v)).collect(),
        }
    }
}

impl FromIterator<(String, f64)> for ParamBinding {
    fn from_iter<T: IntoIterator<Item = (String, f64)>>(iter: T) -> Self {
        ParamBinding {
            values: iter.into_iter().collect(),
        }
    }
}
