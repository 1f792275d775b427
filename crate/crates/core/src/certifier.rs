//! Certification of the three-solutions hypotheses.
//!
//! Computes `Θ(c)`, `Λ(d)`, checks `(d₁)` exactly and `(d₂)` by sampling, and
//! emits the admissible interval
//! `((2^n + Σ 2^{n-i} a_i + T V₁) / (q Λ(d)), 1 / (q ρ^q Θ(c)))`.
//!
//! Conditions quantified over all real `t` (`(d₂)`, `(F₁)`–`(F₃)`) can only be
//! falsified numerically; every sampled check reports the box it covered.

use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bvp::{embed_state, norm_x_pow, BvpProblem};
use crate::error::{Error, Result};
use crate::nonlinearity::{Nonlinearity, SupHint};

const SUP_GRID: usize = 1024;
const SUP_RTOL: f64 = 1e-10;

/// Witness `(b, p)` for the growth bound `F(k, t) <= b (1 + |t|^p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthWitness {
    pub b: f64,
    pub p: f64,
}

/// A sampled interval of `t` values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleBox {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl SampleBox {
    pub fn new(lo: f64, hi: f64, count: usize) -> Self {
        SampleBox { lo, hi, count }
    }

    /// `[-10 d, 10 d]` with 4096 samples.
    pub fn around(d: f64) -> Self {
        SampleBox::new(-10.0 * d.abs(), 10.0 * d.abs(), 4096)
    }

    /// Half the samples linear over the box, half log-spaced in `|t|` (both signs).
    pub fn points(&self) -> Vec<f64> {
        let n_lin = (self.count / 2).max(2);
        let n_log = (self.count - n_lin.min(self.count)) / 2;
        let mut pts: Vec<f64> = (0..n_lin)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (n_lin - 1) as f64)
            .collect();
        let big = self.lo.abs().max(self.hi.abs());
        if n_log >= 2 && big > 0.0 {
            let (a, b) = ((big * 1e-6).ln(), big.ln());
            for i in 0..n_log {
                let m = (a + (b - a) * i as f64 / (n_log - 1) as f64).exp();
                pts.push(m);
                pts.push(-m);
            }
        }
        pts.retain(|t| *t >= self.lo && *t <= self.hi);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }
}

/// Outcome of a falsification-by-sampling check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledCheck {
    pub holds: bool,
    pub samples: usize,
    pub sampled_box: Option<SampleBox>,
    pub violation: Option<String>,
}

impl SampledCheck {
    fn pass(samples: usize, sampled_box: Option<SampleBox>) -> Self {
        SampledCheck {
            holds: true,
            samples,
            sampled_box,
            violation: None,
        }
    }

    fn fail(samples: usize, sampled_box: Option<SampleBox>, why: String) -> Self {
        SampledCheck {
            holds: false,
            samples,
            sampled_box,
            violation: Some(why),
        }
    }
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, xtol: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > xtol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// `sup_{|s| <= c} F(k, s)`.
///
/// Exact under [`SupHint::IncreasingInAbs`]; otherwise a 1024-point grid
/// (plus `s = 0`) followed by golden-section polishing around the three best
/// cells, to relative tolerance `1e-10`.
pub fn sup_f(k: i64, c: f64, nl: &dyn Nonlinearity) -> f64 {
    let c = c.abs();
    if c == 0.0 {
        return nl.potential(k, 0.0);
    }
    let lo = match nl.sup_hint() {
        SupHint::IncreasingInAbs => {
            return nl.potential(k, c).max(nl.potential(k, -c));
        }
        SupHint::Even => 0.0,
        SupHint::None => -c,
    };
    let f = |s: f64| nl.potential(k, s);
    let grid: Vec<(f64, f64)> = (0..SUP_GRID)
        .map(|i| {
            let s = lo + (c - lo) * i as f64 / (SUP_GRID - 1) as f64;
            (s, f(s))
        })
        .collect();
    let mut best = grid.iter().map(|g| g.1).fold(f(0.0), f64::max);
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&i, &j| grid[j].1.total_cmp(&grid[i].1).then(i.cmp(&j)));
    for &i in order.iter().take(3) {
        let a = grid[i.saturating_sub(1)].0;
        let b = grid[(i + 1).min(grid.len() - 1)].0;
        let (_, v) = golden_max(f, a, b, SUP_RTOL * c.max(1.0));
        best = best.max(v);
    }
    best
}

/// `Θ(c) = Σ_{k=1}^T sup_{|s| <= c} F(k, s) / c^q`.
pub fn theta(c: f64, q: f64, nl: &dyn Nonlinearity, t_len: usize) -> f64 {
    let s: f64 = (1..=t_len as i64).map(|k| sup_f(k, c, nl)).sum();
    s / c.powf(q)
}

/// `Λ(d) = Σ_{k=1}^T (F(k, d) - sup_{|s| <= c} F(k, s)) / d^q`.
pub fn lambda_cap(c: f64, d: f64, q: f64, nl: &dyn Nonlinearity, t_len: usize) -> Result<f64> {
    if !(c > 0.0 && c < d) {
        return Err(Error::domain(format!(
            "need 0 < c < d, got c = {c}, d = {d}"
        )));
    }
    let s: f64 = (1..=t_len as i64)
        .map(|k| nl.potential(k, d) - sup_f(k, c, nl))
        .sum();
    Ok(s / d.powf(q))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct D1Check {
    /// `Θ(c)`
    pub lhs: f64,
    /// `Λ(d) / (K ρ^q)`, `K = 4 + 2a + T V₁` for the fourth-order problem.
    pub rhs: f64,
    pub holds: bool,
}

pub fn check_d1(c: f64, d: f64, problem: &BvpProblem) -> Result<D1Check> {
    let q = problem.q().value();
    let nl = problem.nonlinearity().as_ref();
    let lhs = theta(c, q, nl, problem.t_len());
    let cap = lambda_cap(c, d, q, nl, problem.t_len())?;
    let rhs = cap / (problem.norm_constant() * problem.rho().powf(q));
    Ok(D1Check {
        lhs,
        rhs,
        holds: lhs < rhs,
    })
}

/// Samples `F(k, t) <= b (1 + |t|^p)` for every `k` in `[1, T]`.
pub fn check_d2(
    nl: &dyn Nonlinearity,
    witness: GrowthWitness,
    q: f64,
    t_len: usize,
    sample_box: SampleBox,
) -> Result<SampledCheck> {
    if !(witness.b > 0.0 && witness.p >= 0.0 && witness.p < q) {
        return Err(Error::domain(format!(
            "growth witness needs b > 0 and 0 <= p < q = {q}, got b = {}, p = {}",
            witness.b, witness.p
        )));
    }
    let pts = sample_box.points();
    let mut n = 0;
    for k in 1..=t_len as i64 {
        for &t in &pts {
            n += 1;
            let bound = witness.b * (1.0 + t.abs().powf(witness.p));
            let v = nl.potential(k, t);
            if !(v <= bound) {
                return Ok(SampledCheck::fail(
                    n,
                    Some(sample_box),
                    format!("F({k}, {t}) = {v} exceeds {bound}"),
                ));
            }
        }
    }
    Ok(SampledCheck::pass(n, Some(sample_box)))
}

/// `(lambda_lo, lambda_hi)` of the three-solutions theorem.
///
/// `lambda_lo` is `+inf` when `Λ(d) <= 0`; `lambda_hi` is `+inf` when `Θ(c) <= 0`.
/// An empty interval is a certification failure carrying both endpoints.
pub fn lambda_interval(c: f64, d: f64, problem: &BvpProblem) -> Result<(f64, f64)> {
    let (lo, hi) = interval_endpoints(c, d, problem)?;
    if lo < hi {
        Ok((lo, hi))
    } else {
        Err(Error::Certification {
            reason: "empty lambda interval".into(),
            lambda_lo: lo,
            lambda_hi: hi,
        })
    }
}

fn interval_endpoints(c: f64, d: f64, problem: &BvpProblem) -> Result<(f64, f64)> {
    let q = problem.q().value();
    let nl = problem.nonlinearity().as_ref();
    let th = theta(c, q, nl, problem.t_len());
    let cap = lambda_cap(c, d, q, nl, problem.t_len())?;
    let lo = if cap > 0.0 {
        problem.norm_constant() / (q * cap)
    } else {
        f64::INFINITY
    };
    let hi = if th > 0.0 {
        1.0 / (q * problem.rho().powf(q) * th)
    } else {
        f64::INFINITY
    };
    Ok((lo, hi))
}

/// Direct check on `v_d`, the state equal to `d` on `[1, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VdThreshold {
    /// `‖v_d‖_X^q` by direct summation.
    pub norm_pow: f64,
    /// `(2^n + Σ 2^{n-i} a_i + Σ V(k)) d^q`, i.e. `(4 + 2a + Σ V) d^q` for `n = 2`.
    pub formula: f64,
    pub formula_matches: bool,
    /// `q r = (c / ρ)^q`.
    pub threshold: f64,
    pub exceeds: bool,
}

pub fn check_vd_threshold(c: f64, d: f64, problem: &BvpProblem) -> Result<VdThreshold> {
    if !(c > 0.0 && c < d) {
        return Err(Error::domain(format!(
            "need 0 < c < d, got c = {c}, d = {d}"
        )));
    }
    let q = problem.q().value();
    let vd = embed_state(&vec![d; problem.t_len()], problem)?;
    let norm_pow = norm_x_pow(&vd, problem);
    let n = problem.order();
    let mut k = 2f64.powi(n as i32);
    for (i, a) in problem.coefficients().iter().enumerate() {
        k += 2f64.powi((n - (i + 1)) as i32) * a;
    }
    let formula = (k + problem.v_table().iter().sum::<f64>()) * d.powf(q);
    let threshold = (c / problem.rho()).powf(q);
    Ok(VdThreshold {
        norm_pow,
        formula,
        formula_matches: (norm_pow - formula).abs() <= 1e-10 * formula.abs().max(1.0),
        threshold,
        exceeds: norm_pow > threshold,
    })
}

/// Samples the superlinearity condition: `μ F(k,t) <= t f(k,t)` for `t != 0`
/// and `F(k,t) > 0` for `t >= s`.
pub fn rabinowitz_check(
    nl: &dyn Nonlinearity,
    mu: f64,
    s: f64,
    sample_box: SampleBox,
    k_range: RangeInclusive<i64>,
) -> SampledCheck {
    let pts = sample_box.points();
    let mut n = 0;
    for k in k_range {
        for &t in pts.iter().filter(|t| **t != 0.0) {
            n += 1;
            let lhs = mu * nl.potential(k, t);
            let rhs = t * nl.f(k, t);
            if !(lhs <= rhs + 1e-12 * (lhs.abs() + rhs.abs())) {
                return SampledCheck::fail(
                    n,
                    Some(sample_box),
                    format!("mu F({k}, {t}) = {lhs} > t f = {rhs}"),
                );
            }
            if t >= s && !(nl.potential(k, t) > 0.0) {
                return SampledCheck::fail(
                    n,
                    Some(sample_box),
                    format!("F({k}, {t}) is not positive above s = {s}"),
                );
            }
        }
    }
    SampledCheck::pass(n, Some(sample_box))
}

/// Samples `|f(k,t)| / |t|^{q-1}` at `t = ±10^-1 .. ±10^-8`; passes when the
/// ratio at the smallest scale is below `1e-4` for every `k`.
pub fn smallness_check(
    nl: &dyn Nonlinearity,
    q: f64,
    k_range: RangeInclusive<i64>,
) -> SampledCheck {
    let mut n = 0;
    for k in k_range {
        for sign in [1.0, -1.0] {
            let mut last = f64::NAN;
            for e in 1..=8 {
                let t = sign * 10f64.powi(-e);
                last = nl.f(k, t).abs() / t.abs().powf(q - 1.0);
                n += 1;
            }
            if !(last < 1e-4) {
                return SampledCheck::fail(
                    n,
                    None,
                    format!("|f({k}, {:e})| / |t|^(q-1) = {last}", sign * 1e-8),
                );
            }
        }
    }
    SampledCheck::pass(n, None)
}

/// Samples `f(k, t) = f(k + T, t)` and `V(k) = V(k + T)` at random `(k, t)`.
pub fn periodicity_check(
    nl: &dyn Nonlinearity,
    v: impl Fn(i64) -> f64,
    period: usize,
    samples: usize,
    seed: u64,
) -> SampledCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = period as i64;
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-14 * a.abs().max(b.abs()).max(1.0);
    for i in 0..samples {
        let k = rng.gen_range(-1000..=1000);
        let t = rng.gen_range(-10.0..10.0);
        if !close(v(k), v(k + p)) {
            return SampledCheck::fail(i + 1, None, format!("V({k}) != V({})", k + p));
        }
        if !close(nl.f(k, t), nl.f(k + p, t)) {
            return SampledCheck::fail(i + 1, None, format!("f({k}, {t}) != f({}, {t})", k + p));
        }
    }
    SampledCheck::pass(samples, None)
}

/// Energies that admit the `μ`-coercivity estimate of bounded (PS) sequences.
pub trait CoercivityTarget {
    fn exponent_q(&self) -> f64;
    fn energy(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], out: &mut [f64]);
    /// `‖u‖_q^q = (1/q) Σ V(k) |u(k)|^q`.
    fn weighted_norm_pow(&self, x: &[f64]) -> f64;
}

impl CoercivityTarget for BvpProblem {
    fn exponent_q(&self) -> f64 {
        self.q().value()
    }
    fn energy(&self, x: &[f64]) -> f64 {
        self.energy_free(x)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        self.gradient_free(x, out)
    }
    fn weighted_norm_pow(&self, x: &[f64]) -> f64 {
        let q = self.exponent_q();
        x.iter()
            .enumerate()
            .map(|(i, u)| self.v(i as i64 + 1) * u.abs().powf(q))
            .sum::<f64>()
            / q
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsCheck {
    /// `μ J(u) - ⟨J'(u), u⟩`
    pub lhs: f64,
    /// `(μ - q) ‖u‖_q^q`
    pub rhs: f64,
    pub holds: bool,
}

pub fn ps_lower_bound_check<P: CoercivityTarget + ?Sized>(
    target: &P,
    x: &[f64],
    mu: f64,
) -> PsCheck {
    let mut g = vec![0.0; x.len()];
    target.gradient(x, &mut g);
    let pairing: f64 = g.iter().zip(x).map(|(a, b)| a * b).sum();
    let lhs = mu * target.energy(x) - pairing;
    let rhs = (mu - target.exponent_q()) * target.weighted_norm_pow(x);
    PsCheck {
        lhs,
        rhs,
        holds: lhs >= rhs - 1e-8,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub order: usize,
    pub c: f64,
    pub d: f64,
    pub rho: f64,
    pub rho_q: f64,
    /// `ρ^q` as `"num/den"` when `q` is an integer.
    pub rho_q_exact: Option<String>,
    pub theta_c: f64,
    pub lambda_d: f64,
    /// `r = c^q / (q ρ^q)`
    pub level_r: f64,
    pub norm_constant: f64,
    pub d1: D1Check,
    pub d1_holds: bool,
    pub d2: Option<SampledCheck>,
    pub d2_holds: bool,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub interval_nonempty: bool,
    pub vd_threshold: VdThreshold,
    pub vd_threshold_ok: bool,
}

impl Certificate {
    pub fn contains(&self, lambda: f64) -> bool {
        self.interval_nonempty && lambda > self.lambda_lo && lambda < self.lambda_hi
    }

    pub fn certified(&self) -> bool {
        self.d1_holds && self.d2_holds && self.interval_nonempty && self.vd_threshold_ok
    }
}

/// Assembles a [`Certificate`]. `(d₂)` counts as failed when no witness is given.
pub fn certify(
    problem: &BvpProblem,
    c: f64,
    d: f64,
    witness: Option<GrowthWitness>,
    sample_box: Option<SampleBox>,
) -> Result<Certificate> {
    if !(c > 0.0 && c < d) {
        return Err(Error::domain(format!(
            "need 0 < c < d, got c = {c}, d = {d}"
        )));
    }
    let q = problem.q().value();
    let nl = problem.nonlinearity().as_ref();
    let rho = problem.rho();
    let rho_q = rho.powf(q);
    let d1 = check_d1(c, d, problem)?;
    let d2 = witness
        .map(|w| {
            check_d2(
                nl,
                w,
                q,
                problem.t_len(),
                sample_box.unwrap_or(SampleBox::around(d)),
            )
        })
        .transpose()?;
    let (lambda_lo, lambda_hi) = interval_endpoints(c, d, problem)?;
    let vd = check_vd_threshold(c, d, problem)?;
    Ok(Certificate {
        order: problem.order(),
        c,
        d,
        rho,
        rho_q,
        rho_q_exact: problem.rho_q_exact().map(|r| r.to_string()),
        theta_c: d1.lhs,
        lambda_d: lambda_cap(c, d, q, nl, problem.t_len())?,
        level_r: c.powf(q) / (q * rho_q),
        norm_constant: problem.norm_constant(),
        d1_holds: d1.holds,
        d1,
        d2_holds: d2.as_ref().is_some_and(|x| x.holds),
        d2,
        lambda_lo,
        lambda_hi,
        interval_nonempty: lambda_lo < lambda_hi,
        vd_threshold_ok: vd.exceeds,
        vd_threshold: vd,
    })
}
