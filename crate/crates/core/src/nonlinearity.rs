//! Right-hand sides `f(k, t)` together with their potentials `F(k, t)`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::lattice::{phi, phi_antideriv, Exponent};

/// Shape information that lets `sup_{|s| <= c} F(k, s)` be computed exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SupHint {
    Even,
    IncreasingInAbs,
    None,
}

pub trait Nonlinearity: Send + Sync + fmt::Debug {
    fn f(&self, k: i64, t: f64) -> f64;

    /// The potential `F(k, t)`, an antiderivative of `f(k, ·)`.
    fn potential(&self, k: i64, t: f64) -> f64;

    /// `∂f/∂t`. The default is a central difference.
    fn df(&self, k: i64, t: f64) -> f64 {
        let h = 1e-6 * t.abs().max(1.0);
        (self.f(k, t + h) - self.f(k, t - h)) / (2.0 * h)
    }

    /// Period in `k`, when the nonlinearity is declared periodic.
    fn period(&self) -> Option<usize> {
        None
    }

    fn sup_hint(&self) -> SupHint {
        SupHint::None
    }
}

pub type SharedNonlinearity = Arc<dyn Nonlinearity>;

#[derive(Debug, Clone, Copy, Default)]
pub struct Zero;

impl Nonlinearity for Zero {
    fn f(&self, _: i64, _: f64) -> f64 {
        0.0
    }
    fn potential(&self, _: i64, _: f64) -> f64 {
        0.0
    }
    fn df(&self, _: i64, _: f64) -> f64 {
        0.0
    }
    fn period(&self) -> Option<usize> {
        Some(1)
    }
    fn sup_hint(&self) -> SupHint {
        SupHint::IncreasingInAbs
    }
}

/// `f(k, t) = b(k) φ_r(t)` with `b` a periodic table indexed by `k mod len(b)`.
#[derive(Debug, Clone)]
pub struct PowerFamily {
    b: Vec<f64>,
    r: Exponent,
}

impl PowerFamily {
    pub fn new(b: Vec<f64>, r: Exponent) -> crate::Result<Self> {
        if b.is_empty() || b.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(crate::Error::domain(
                "power family weights must be positive",
            ));
        }
        Ok(PowerFamily { b, r })
    }

    pub fn r(&self) -> Exponent {
        self.r
    }

    #[inline]
    pub fn b(&self, k: i64) -> f64 {
        self.b[k.rem_euclid(self.b.len() as i64) as usize]
    }
}

impl Nonlinearity for PowerFamily {
    fn f(&self, k: i64, t: f64) -> f64 {
        self.b(k) * phi(self.r, t)
    }
    fn potential(&self, k: i64, t: f64) -> f64 {
        self.b(k) * phi_antideriv(self.r, t)
    }
    fn df(&self, k: i64, t: f64) -> f64 {
        self.b(k) * crate::lattice::phi_prime(self.r, t)
    }
    fn period(&self) -> Option<usize> {
        Some(self.b.len())
    }
    fn sup_hint(&self) -> SupHint {
        SupHint::IncreasingInAbs
    }
}

/// `f(k, t) = scale · k² · g(t)` where `g(t) = e^t` up to `cap` and `e^cap` beyond.
///
/// The potential is `scale · k² · G(t)` with `G(t) = e^t` for `t <= cap` and
/// `e^cap (t - cap + 1)` above it. `G(0) = 1`, so `F(k, 0) != 0` for this family.
#[derive(Debug, Clone, Copy)]
pub struct CappedExponential {
    pub cap: f64,
    pub scale: f64,
}

impl CappedExponential {
    pub fn example2() -> Self {
        CappedExponential {
            cap: 14.0,
            scale: 1.0,
        }
    }

    #[inline]
    fn weight(&self, k: i64) -> f64 {
        let k = k as f64;
        self.scale * k * k
    }
}

impl Nonlinearity for CappedExponential {
    fn f(&self, k: i64, t: f64) -> f64 {
        self.weight(k) * t.min(self.cap).exp()
    }
    fn potential(&self, k: i64, t: f64) -> f64 {
        let g = if t <= self.cap {
            t.exp()
        } else {
            self.cap.exp() * (t - self.cap + 1.0)
        };
        self.weight(k) * g
    }
    fn df(&self, k: i64, t: f64) -> f64 {
        if t < self.cap {
            self.weight(k) * t.exp()
        } else {
            0.0
        }
    }
}

/// `f(k, t) = Σ_j c_j t^j`, independent of `k`.
#[derive(Debug, Clone)]
pub struct Polynomial {
    coefficients: Vec<f64>,
}

impl Polynomial {
    pub fn new(coefficients: Vec<f64>) -> Self {
        Polynomial { coefficients }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }
}

fn horner(c: impl DoubleEndedIterator<Item = f64>, t: f64) -> f64 {
    c.rev().fold(0.0, |acc, cj| acc * t + cj)
}

impl Nonlinearity for Polynomial {
    fn f(&self, _: i64, t: f64) -> f64 {
        horner(self.coefficients.iter().copied(), t)
    }
    fn potential(&self, _: i64, t: f64) -> f64 {
        let integrated = self
            .coefficients
            .iter()
            .enumerate()
            .map(|(j, c)| c / (j + 1) as f64);
        t * horner(integrated, t)
    }
    fn df(&self, _: i64, t: f64) -> f64 {
        let derived = self
            .coefficients
            .iter()
            .enumerate()
            .skip(1)
            .map(|(j, c)| c * j as f64);
        horner(derived, t)
    }
    fn period(&self) -> Option<usize> {
        Some(1)
    }
}

type ScalarFn = Arc<dyn Fn(i64, f64) -> f64 + Send + Sync>;

/// A nonlinearity assembled from closures.
#[derive(Clone)]
pub struct Custom {
    f: ScalarFn,
    potential: ScalarFn,
    df: Option<ScalarFn>,
    period: Option<usize>,
    hint: SupHint,
}

impl Custom {
    pub fn new(
        f: impl Fn(i64, f64) -> f64 + Send + Sync + 'static,
        potential: impl Fn(i64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Custom {
            f: Arc::new(f),
            potential: Arc::new(potential),
            df: None,
            period: None,
            hint: SupHint::None,
        }
    }

    pub fn with_derivative(mut self, df: impl Fn(i64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.df = Some(Arc::new(df));
        self
    }

    pub fn with_period(mut self, period: usize) -> Self {
        self.period = Some(period);
        self
    }

    pub fn with_hint(mut self, hint: SupHint) -> Self {
        self.hint = hint;
        self
    }
}

impl fmt::Debug for Custom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Custom")
            .field("period", &self.period)
            .field("hint", &self.hint)
            .finish_non_exhaustive()
    }
}

impl Nonlinearity for Custom {
    fn f(&self, k: i64, t: f64) -> f64 {
        (self.f)(k, t)
    }
    fn potential(&self, k: i64, t: f64) -> f64 {
        (self.potential)(k, t)
    }
    fn df(&self, k: i64, t: f64) -> f64 {
        match &self.df {
            Some(df) => df(k, t),
            None => {
                let h = 1e-6 * t.abs().max(1.0);
                (self.f(k, t + h) - self.f(k, t - h)) / (2.0 * h)
            }
        }
    }
    fn period(&self) -> Option<usize> {
        self.period
    }
    fn sup_hint(&self) -> SupHint {
        self.hint
    }
}

/// Spot-checks the structural invariants of a nonlinearity on `k_range`.
///
/// Returns one message per violated invariant (`F(k,0) = 0`, and monotonicity
/// in `|t|` when the hint claims it).
pub fn invariant_warnings(
    nl: &dyn Nonlinearity,
    k_range: std::ops::RangeInclusive<i64>,
) -> Vec<String> {
    let mut out = Vec::new();
    let nonzero: Vec<i64> = k_range
        .clone()
        .filter(|&k| nl.potential(k, 0.0) != 0.0)
        .collect();
    if !nonzero.is_empty() {
        out.push(format!(
            "F(k,0) != 0 for k in {:?} (potential is defined up to an additive constant)",
            nonzero
        ));
    }
    if nl.sup_hint() == SupHint::IncreasingInAbs {
        'outer: for k in k_range {
            let mut prev = (nl.potential(k, 0.0), nl.potential(k, 0.0));
            for i in 1..=200 {
                let t = 0.05 * i as f64;
                let cur = (nl.potential(k, t), nl.potential(k, -t));
                if cur.0 < prev.0 || cur.1 < prev.1 {
                    out.push(format!("F({k},·) is not nondecreasing in |t| near t = {t}"));
                    break 'outer;
                }
                prev = cur;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn potentials_differentiate_to_f() {
        let nls: Vec<SharedNonlinearity> = vec![
            Arc::new(PowerFamily::new(vec![1.0, 2.5], Exponent::new(3.5).unwrap()).unwrap()),
            Arc::new(CappedExponential::example2()),
            Arc::new(Polynomial::new(vec![0.5, 4.0, -1.0, 0.25])),
        ];
        for nl in nls {
            for k in 1..4 {
                for &t in &[-2.3f64, -0.4, 0.7, 3.1, 13.2, 15.5] {
                    let h = 1e-6 * f64::max(1.0, t.abs());
                    let fd = (nl.potential(k, t + h) - nl.potential(k, t - h)) / (2.0 * h);
                    let f = nl.f(k, t);
                    assert!(
                        (fd - f).abs() <= 1e-6 * f.abs().max(1.0),
                        "{nl:?} k={k} t={t}"
                    );
                    let dfd = (nl.f(k, t + h) - nl.f(k, t - h)) / (2.0 * h);
                    assert!((dfd - nl.df(k, t)).abs() <= 1e-5 * dfd.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn example2_potential_values() {
        let nl = CappedExponential::example2();
        assert_eq!(nl.potential(3, 1.0), 9.0 * 1f64.exp());
        assert_eq!(nl.potential(2, 14.0), 4.0 * 14f64.exp());
        assert!((nl.potential(1, 15.0) - 2.0 * 14f64.exp()).abs() < 1e-6);
        assert_eq!(nl.f(1, 20.0), 14f64.exp());
    }

    #[test]
    fn invariant_warnings_flag_example2() {
        let w = invariant_warnings(&CappedExponential::example2(), 1..=8);
        assert_eq!(w.len(), 1);
        assert!(invariant_warnings(&Polynomial::new(vec![1.0, 2.0]), 1..=8).is_empty());
        let bad = Custom::new(|_, t| -2.0 * t, |_, t| -t * t).with_hint(SupHint::IncreasingInAbs);
        assert_eq!(invariant_warnings(&bad, 0..=0).len(), 1);
    }

    #[test]
    fn power_family_is_periodic_in_k() {
        let nl = PowerFamily::new(vec![1.0, 3.0], Exponent::new(4.0).unwrap()).unwrap();
        assert_eq!(nl.f(-3, 1.5), nl.f(1, 1.5));
        assert_eq!(nl.period(), Some(2));
        assert!(PowerFamily::new(vec![1.0, -1.0], Exponent::new(4.0).unwrap()).is_err());
    }
}
