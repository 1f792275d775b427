//! Difference calculus on finite integer windows.
//!
//! A [`LatticeFunction`] stores real values `u(k)` for every `k` in an
//! inclusive window `[lo, hi]`. All operations return new functions; inputs
//! are never mutated.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A real exponent strictly greater than one.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Exponent(f64);

impl Exponent {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 1.0 {
            Ok(Exponent(value))
        } else {
            Err(Error::Exponent(value))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// Returns the exponent as an integer when it is one exactly.
    pub fn as_integer(self) -> Option<u32> {
        if self.0.fract() == 0.0 && self.0 <= u32::MAX as f64 {
            Some(self.0 as u32)
        } else {
            None
        }
    }
}

impl TryFrom<f64> for Exponent {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Exponent::new(value)
    }
}

impl From<Exponent> for f64 {
    fn from(e: Exponent) -> f64 {
        e.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeFunction {
    window_lo: i64,
    values: Vec<f64>,
}

impl LatticeFunction {
    /// Builds a function on `[window_lo, window_lo + values.len() - 1]`.
    pub fn new(window_lo: i64, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("lattice function needs a nonempty window"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "non-finite value at index {}",
                window_lo + i as i64
            )));
        }
        Ok(LatticeFunction { window_lo, values })
    }

    pub fn zeros(window_lo: i64, window_hi: i64) -> Self {
        assert!(window_hi >= window_lo, "empty window");
        LatticeFunction {
            window_lo,
            values: vec![0.0; (window_hi - window_lo + 1) as usize],
        }
    }

    pub fn from_fn(window_lo: i64, window_hi: i64, f: impl Fn(i64) -> f64) -> Result<Self> {
        Self::new(window_lo, (window_lo..=window_hi).map(f).collect())
    }

    #[inline]
    pub fn window_lo(&self) -> i64 {
        self.window_lo
    }

    #[inline]
    pub fn window_hi(&self) -> i64 {
        self.window_lo + self.values.len() as i64 - 1
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn contains(&self, k: i64) -> bool {
        k >= self.window_lo && k <= self.window_hi()
    }

    /// Value at `k`. Panics outside the window.
    #[inline]
    pub fn at(&self, k: i64) -> f64 {
        assert!(self.contains(k), "index {k} outside window");
        self.values[(k - self.window_lo) as usize]
    }

    /// Value at `k`, or zero outside the window.
    #[inline]
    pub fn get_or_zero(&self, k: i64) -> f64 {
        if self.contains(k) {
            self.values[(k - self.window_lo) as usize]
        } else {
            0.0
        }
    }

    pub fn indices(&self) -> impl Iterator<Item = i64> {
        self.window_lo..=self.window_hi()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &v)| (self.window_lo + i as i64, v))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Sup-norm distance, treating both functions as zero outside their windows.
    pub fn sup_distance(&self, other: &LatticeFunction) -> f64 {
        let lo = self.window_lo.min(other.window_lo);
        let hi = self.window_hi().max(other.window_hi());
        (lo..=hi).fold(0.0, |m, k| {
            m.max((self.get_or_zero(k) - other.get_or_zero(k)).abs())
        })
    }

    pub fn scaled(&self, t: f64) -> Result<Self> {
        Self::new(self.window_lo, self.values.iter().map(|v| t * v).collect())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.window_lo, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn forward_diff(&self) -> Result<Self> {
        forward_diff(self)
    }

    pub fn iterated_diff(&self, i: usize) -> Result<Self> {
        iterated_diff(self, i)
    }
}

/// `Δu(k) = u(k+1) - u(k)` on `[lo, hi-1]`.
pub fn forward_diff(u: &LatticeFunction) -> Result<LatticeFunction> {
    if u.len() < 2 {
        return Err(Error::domain(
            "forward difference needs a window of length >= 2",
        ));
    }
    let values = u.values.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(LatticeFunction {
        window_lo: u.window_lo,
        values,
    })
}

/// `Δ^i u`, defined on `[lo, hi-i]`.
pub fn iterated_diff(u: &LatticeFunction, i: usize) -> Result<LatticeFunction> {
    if i == 0 {
        return Err(Error::domain("difference order must be positive"));
    }
    if u.len() < i + 1 {
        return Err(Error::domain(format!(
            "difference of order {i} needs a window of length >= {}, got {}",
            i + 1,
            u.len()
        )));
    }
    let mut out = forward_diff(u)?;
    for _ in 1..i {
        out = forward_diff(&out)?;
    }
    Ok(out)
}

/// Coefficients `c_l` with `Δ^m u(j) = Σ_l c_l u(j + l)`, `l = 0..=m`.
pub fn difference_stencil(m: usize) -> Vec<f64> {
    let mut c = vec![1.0];
    for _ in 0..m {
        let mut next = vec![0.0; c.len() + 1];
        for (l, &v) in c.iter().enumerate() {
            next[l + 1] += v;
            next[l] -= v;
        }
        c = next;
    }
    c
}

/// `φ_p(t) = t |t|^{p-2}`, extended by continuity with `φ_p(0) = 0`.
///
/// For `p < 2` the derivative of `φ_p` is unbounded near the origin.
#[inline]
pub fn phi(p: Exponent, t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t * t.abs().powf(p.0 - 2.0)
    }
}

/// Derivative of [`phi`]: `(p-1)|t|^{p-2}`. Infinite at zero when `p < 2`.
#[inline]
pub fn phi_prime(p: Exponent, t: f64) -> f64 {
    let p = p.0;
    if t == 0.0 {
        if p > 2.0 {
            0.0
        } else if p == 2.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        (p - 1.0) * t.abs().powf(p - 2.0)
    }
}

/// `|t|^p / p`, the antiderivative of [`phi`] vanishing at zero.
#[inline]
pub fn phi_antideriv(p: Exponent, t: f64) -> f64 {
    t.abs().powf(p.0) / p.0
}

/// `(Σ_k |u(k)|^q)^{1/q}` over the window.
pub fn lq_norm(u: &LatticeFunction, q: Exponent) -> f64 {
    let s: f64 = u.values.iter().map(|v| v.abs().powf(q.0)).sum();
    s.powf(1.0 / q.0)
}

/// `((1/q) Σ_k V(k) |u(k)|^q)^{1/q}` over the window.
pub fn weighted_q_norm(
    u: &LatticeFunction,
    q: Exponent,
    weight: impl Fn(i64) -> f64,
) -> Result<f64> {
    let mut s = 0.0;
    for (k, v) in u.iter() {
        let w = weight(k);
        if !(w > 0.0) {
            return Err(Error::domain(format!(
                "weight at {k} must be positive, got {w}"
            )));
        }
        s += w * v.abs().powf(q.0);
    }
    Ok((s / q.0).powf(1.0 / q.0))
}
