//! Finitely supported signals on the integers and the exponent bookkeeping
//! shared by every operator in the crate.
//!
//! A [`Signal`] is a dense window of samples anchored at an integer offset.
//! Samples outside the window are zero.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest window (in samples) any signal or convolution output may occupy.
pub const MAX_WINDOW: u64 = 1 << 31;

/// A real-valued function on the integers with finite support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Signal {
    /// Integer index of `values[0]`.
    pub offset: i64,
    pub values: Vec<f64>,
}

impl Signal {
    pub fn new(offset: i64, values: Vec<f64>) -> Self {
        Signal { offset, values }
    }

    pub fn zero() -> Self {
        Signal::default()
    }

    /// The unit mass `δ_at`.
    pub fn delta(at: i64) -> Self {
        Signal::new(at, vec![1.0])
    }

    /// Indicator of the closed interval `[lo, hi]`.
    pub fn indicator(lo: i64, hi: i64) -> Result<Self> {
        if hi < lo {
            return Ok(Signal::zero());
        }
        let len = (hi - lo) as u64 + 1;
        if len > MAX_WINDOW {
            return Err(Error::WindowTooLarge(len, MAX_WINDOW));
        }
        Ok(Signal::new(lo, vec![1.0; len as usize]))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// One past the last stored index.
    pub fn end(&self) -> i64 {
        self.offset + self.values.len() as i64
    }

    /// Sample at integer `x` (zero outside the stored window).
    pub fn get(&self, x: i64) -> f64 {
        if x < self.offset {
            return 0.0;
        }
        let i = (x - self.offset) as u64;
        if i < self.values.len() as u64 {
            self.values[i as usize]
        } else {
            0.0
        }
    }

    /// True when every sample is zero (including the empty window).
    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    /// Drops leading and trailing zeros so the first and last stored samples
    /// are nonzero. The zero signal trims to the empty window at offset 0.
    pub fn trimmed(mut self) -> Self {
        let Some(first) = self.values.iter().position(|&v| v != 0.0) else {
            return Signal::zero();
        };
        let last = self.values.iter().rposition(|&v| v != 0.0).unwrap();
        self.values.truncate(last + 1);
        self.values.drain(..first);
        self.offset += first as i64;
        self
    }

    /// `g(y) = f(-y)`.
    pub fn reflect(&self) -> Self {
        if self.values.is_empty() {
            return Signal::zero();
        }
        let mut values = self.values.clone();
        values.reverse();
        Signal::new(-(self.end() - 1), values)
    }

    pub fn scale(&self, factor: f64) -> Self {
        Signal::new(self.offset, self.values.iter().map(|v| v * factor).collect())
    }

    /// Nonzero samples as `(index, value)` pairs.
    pub fn points(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(move |(i, &v)| (self.offset + i as i64, v))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s.trim())?)
    }

    /// `index,value` rows with a header, one per stored sample.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,value\n");
        for (i, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{},{}", self.offset + i as i64, v);
        }
        out
    }
}

/// Hölder conjugate `p' = p / (p - 1)`.
pub fn dual_exponent(p: f64) -> Result<f64> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::Exponent(p, "dual exponent needs 1 < p < inf"));
    }
    Ok(p / (p - 1.0))
}

/// A Lebesgue exponent `p` in `(1, 2]` together with its dual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentPair {
    pub p: f64,
    pub p_prime: f64,
}

impl ExponentPair {
    pub fn new(p: f64) -> Result<Self> {
        if !(p > 1.0 && p <= 2.0) {
            return Err(Error::Exponent(p, "expected 1 < p <= 2"));
        }
        Ok(ExponentPair {
            p,
            p_prime: dual_exponent(p)?,
        })
    }

    /// `d/p - d/p'`, the decay exponent of the improving bound at degree `d`.
    pub fn gap(&self, d: f64) -> f64 {
        d / self.p - d / self.p_prime
    }

    /// Fractional-integration order `1 - (d/p - d/p')` paired with degree `d`.
    pub fn lambda(&self, d: f64) -> f64 {
        1.0 - self.gap(d)
    }
}

/// `(Σ |f(n)|^p)^{1/p}` for `p >= 1`; `p = inf` gives the sup norm.
pub fn lp_norm(f: &Signal, p: f64) -> Result<f64> {
    lp_norm_slice(&f.values, p)
}

pub(crate) fn lp_norm_slice(values: &[f64], p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::Exponent(p, "norm needs p >= 1"));
    }
    let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 || p == f64::INFINITY {
        return Ok(max);
    }
    // scale by the sup norm so large p cannot overflow or underflow
    let sum: f64 = if p == 1.0 {
        values.iter().map(|v| v.abs() / max).sum()
    } else if p == 2.0 {
        values.iter().map(|v| (v / max) * (v / max)).sum()
    } else {
        values
            .iter()
            .filter(|v| **v != 0.0)
            .map(|v| (v.abs() / max).powf(p))
            .sum()
    };
    Ok(max * sum.powf(1.0 / p))
}

/// Number of lattice points with `f(x) > alpha` (strict).
pub fn distribution_function(f: &Signal, alpha: f64) -> Result<u64> {
    if !(alpha > 0.0) {
        return Err(Error::NonPositiveThreshold(alpha));
    }
    Ok(f.values.iter().filter(|&&v| v > alpha).count() as u64)
}
