//! Softmax with an optimality parameter that may be infinite.
//!
//! Entries equal to `-inf` are outside the support and always receive zero
//! mass. Finite temperatures use max-subtraction, so utilities in the hundreds
//! at `beta = 3` do not overflow.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Absolute resolution used to decide that two utilities are tied.
pub const TIE_RESOLUTION: f64 = 1e-9;

/// Softmax optimality. `Infinite` is the hard-max limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Beta {
    Finite(f64),
    Infinite,
}

impl Beta {
    pub fn is_valid(&self) -> bool {
        match *self {
            Beta::Finite(b) => b.is_finite() && b >= 0.0,
            Beta::Infinite => true,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Beta::Infinite)
    }
}

impl From<f64> for Beta {
    fn from(b: f64) -> Self {
        if b == f64::INFINITY {
            Beta::Infinite
        } else {
            Beta::Finite(b)
        }
    }
}

impl fmt::Display for Beta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Beta::Finite(b) => write!(f, "{b}"),
            Beta::Infinite => f.write_str("inf"),
        }
    }
}

// JSON has no infinity literal, so the limit is spelled as the string "inf".
impl Serialize for Beta {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            Beta::Finite(b) => s.serialize_f64(b),
            Beta::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Beta {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(b) => Ok(Beta::Finite(b)),
            Raw::Text(t) => match t.to_ascii_lowercase().as_str() {
                "inf" | "infinite" | "infinity" => Ok(Beta::Infinite),
                other => Err(serde::de::Error::custom(format!(
                    "expected a number or \"inf\", got \"{other}\""
                ))),
            },
        }
    }
}

/// Rounds `x` onto the tie grid. Two values with the same key are tied.
pub fn tie_key(x: f64) -> f64 {
    (x / TIE_RESOLUTION).round()
}

/// Indices of the maximal entries of `values`, compared on the tie grid.
/// `-inf` entries are never part of the set.
pub fn argmax_set(values: &[f64]) -> Vec<usize> {
    let best = values
        .iter()
        .copied()
        .filter(|v| *v > f64::NEG_INFINITY)
        .map(tie_key)
        .fold(f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY {
        return Vec::new();
    }
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > f64::NEG_INFINITY && tie_key(**v) == best)
        .map(|(i, _)| i)
        .collect()
}

/// `exp(beta * v) / sum`, or uniform over the argmax set when `beta` is infinite.
pub fn softmax(values: &[f64], beta: Beta) -> Result<Vec<f64>> {
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::config("utilities", "NaN utility"));
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::EmptySupport);
    }
    match beta {
        Beta::Infinite => {
            let support = argmax_set(values);
            let mass = 1.0 / support.len() as f64;
            let mut out = vec![0.0; values.len()];
            for i in support {
                out[i] = mass;
            }
            Ok(out)
        }
        Beta::Finite(b) => {
            let mut out: Vec<f64> = values
                .iter()
                .map(|&v| {
                    if v == f64::NEG_INFINITY {
                        0.0
                    } else {
                        (b * (v - max)).exp()
                    }
                })
                .collect();
            let total: f64 = out.iter().sum();
            for p in &mut out {
                *p /= total;
            }
            Ok(out)
        }
    }
}
