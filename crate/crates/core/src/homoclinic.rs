//! The whole-line problem by truncation to `[-N, N]`.
//!
//! States are lattice functions on `[-N-n, N+n]` vanishing on the `n` padding
//! sites at each end. The energy is
//!
//! ```text
//! J(u) = Σ_m w_m Σ_k |Δ^m u(k-m)|^{p_m} / p_m + Σ_k V(k)|u(k)|^q / q - λ Σ_k F(k, u(k))
//! ```
//!
//! with `w_n = 1`, `w_{n-i} = a_i`. For `n = 2` the first-order term carries
//! `φ_{p₁}`, consistent with the problem statement (the printed gradient
//! display has `φ_{p₂}` there).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::certifier::CoercivityTarget;
use crate::error::{Error, Result};
use crate::lattice::{
    difference_stencil, iterated_diff, phi, phi_antideriv, phi_prime, Exponent, LatticeFunction,
};
use crate::nonlinearity::SharedNonlinearity;
use crate::solvers::{mountain_pass, CriticalPoint, Objective, SolverConfig, SolverError, Status};

pub const GRADIENT_CONVENTION: &str =
    "first-order term uses phi_{p1} (problem statement), not phi_{p2} (printed gradient display)";

const CURVATURE_CAP: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct HomoclinicProblem {
    /// `p_1 .. p_n`; `p_m` is the exponent of the `Δ^m` term.
    exponents: Vec<Exponent>,
    /// `a_1 .. a_{n-1}`; `a_i` weighs the `Δ^{n-i}` term.
    coefficients: Vec<f64>,
    q: Exponent,
    v: Vec<f64>,
    nonlinearity: SharedNonlinearity,
    lambda: f64,
    mu: Exponent,
    s_threshold: f64,
}

impl HomoclinicProblem {
    /// The fourth-order problem (1).
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        p1: Exponent,
        p2: Exponent,
        q: Exponent,
        a: f64,
        v: Vec<f64>,
        nonlinearity: SharedNonlinearity,
        lambda: f64,
        mu: Exponent,
        s_threshold: f64,
    ) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::domain(format!("a must be positive, got {a}")));
        }
        Self::higher_order(
            vec![p1, p2],
            vec![a],
            q,
            v,
            nonlinearity,
            lambda,
            mu,
            s_threshold,
        )
    }

    /// The order-`n` problem, `n = exponents.len() = coefficients.len() + 1`.
    #[allow(clippy::too_many_arguments)]
    pub fn higher_order(
        exponents: Vec<Exponent>,
        coefficients: Vec<f64>,
        q: Exponent,
        v: Vec<f64>,
        nonlinearity: SharedNonlinearity,
        lambda: f64,
        mu: Exponent,
        s_threshold: f64,
    ) -> Result<Self> {
        if exponents.is_empty() || coefficients.len() + 1 != exponents.len() {
            return Err(Error::domain(format!(
                "order {} needs {} coefficients, got {}",
                exponents.len(),
                exponents.len().saturating_sub(1),
                coefficients.len()
            )));
        }
        if let Some(p) = exponents.iter().find(|p| p.value() < q.value()) {
            return Err(Error::domain(format!(
                "need p_i >= q = {}, got {}",
                q.value(),
                p.value()
            )));
        }
        if let Some(p) = exponents.iter().find(|p| p.value() >= mu.value()) {
            return Err(Error::domain(format!(
                "need mu = {} > p_i, got {}",
                mu.value(),
                p.value()
            )));
        }
        if coefficients.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::domain("coefficients must be nonnegative"));
        }
        if v.is_empty() || v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::domain(
                "V must be a nonempty table of positive values",
            ));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::domain(format!(
                "lambda must be nonnegative, got {lambda}"
            )));
        }
        if !(s_threshold > 0.0) {
            return Err(Error::domain("s must be positive"));
        }
        Ok(HomoclinicProblem {
            exponents,
            coefficients,
            q,
            v,
            nonlinearity,
            lambda,
            mu,
            s_threshold,
        })
    }

    pub fn order(&self) -> usize {
        self.exponents.len()
    }

    pub fn period(&self) -> usize {
        self.v.len()
    }

    pub fn q(&self) -> Exponent {
        self.q
    }

    pub fn mu(&self) -> Exponent {
        self.mu
    }

    pub fn s_threshold(&self) -> f64 {
        self.s_threshold
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn exponents(&self) -> &[Exponent] {
        &self.exponents
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn nonlinearity(&self) -> &SharedNonlinearity {
        &self.nonlinearity
    }

    pub fn v_table(&self) -> &[f64] {
        &self.v
    }

    /// `V(k)`, extended `T`-periodically.
    pub fn v(&self, k: i64) -> f64 {
        self.v[k.rem_euclid(self.v.len() as i64) as usize]
    }

    pub fn weight(&self, m: usize) -> f64 {
        let n = self.order();
        if m == n {
            1.0
        } else {
            self.coefficients[n - m - 1]
        }
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        let mut p = self.clone();
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::domain(format!(
                "lambda must be nonnegative, got {lambda}"
            )));
        }
        p.lambda = lambda;
        Ok(p)
    }

    /// The truncation to `[-N, N]`.
    pub fn truncate(&self, n_half: usize) -> Truncation<'_> {
        Truncation {
            problem: self,
            n_half,
        }
    }

    /// The window `[-N-n, N+n]` of a truncated state.
    pub fn window(&self, n_half: usize) -> (i64, i64) {
        let w = (n_half + self.order()) as i64;
        (-w, w)
    }
}

/// The energy restricted to states supported on `[-N, N]`.
#[derive(Debug, Clone, Copy)]
pub struct Truncation<'a> {
    problem: &'a HomoclinicProblem,
    n_half: usize,
}

impl Truncation<'_> {
    pub fn n_half(&self) -> usize {
        self.n_half
    }

    pub fn problem(&self) -> &HomoclinicProblem {
        self.problem
    }

    fn padded(&self, free: &[f64]) -> Vec<f64> {
        let n = self.problem.order();
        let mut u = vec![0.0; free.len() + 2 * n];
        u[n..n + free.len()].copy_from_slice(free);
        u
    }

    fn site(&self, i: usize) -> i64 {
        i as i64 - self.n_half as i64
    }

    /// Free coordinates of `u`, which must live on this truncation's window
    /// and vanish on the padding.
    pub fn free_of(&self, u: &LatticeFunction) -> Result<Vec<f64>> {
        let (lo, hi) = self.problem.window(self.n_half);
        if u.window_lo() != lo || u.window_hi() != hi {
            return Err(Error::domain(format!(
                "state lives on [{}, {}], expected [{lo}, {hi}]",
                u.window_lo(),
                u.window_hi()
            )));
        }
        let n = self.problem.order();
        let v = u.values();
        if v[..n].iter().chain(&v[v.len() - n..]).any(|x| *x != 0.0) {
            return Err(Error::domain("state must vanish on the padding sites"));
        }
        Ok(v[n..v.len() - n].to_vec())
    }
}

impl Objective for Truncation<'_> {
    fn dim(&self) -> usize {
        2 * self.n_half + 1
    }

    fn value(&self, x: &[f64]) -> f64 {
        let p = self.problem;
        let u = self.padded(x);
        let mut s = 0.0;
        for m in 1..=p.order() {
            let st = difference_stencil(m);
            let e = p.exponents[m - 1];
            let mut part = 0.0;
            for b in 0..u.len() - m {
                let d: f64 = st.iter().zip(&u[b..]).map(|(c, x)| c * x).sum();
                part += phi_antideriv(e, d);
            }
            s += p.weight(m) * part;
        }
        for (i, &xi) in x.iter().enumerate() {
            let k = self.site(i);
            s += p.v(k) * phi_antideriv(p.q, xi) - p.lambda * p.nonlinearity.potential(k, xi);
        }
        s
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let p = self.problem;
        let n = p.order();
        let u = self.padded(x);
        let mut g = vec![0.0; u.len()];
        for m in 1..=n {
            let st = difference_stencil(m);
            let e = p.exponents[m - 1];
            let w = p.weight(m);
            for b in 0..u.len() - m {
                let d: f64 = st.iter().zip(&u[b..]).map(|(c, x)| c * x).sum();
                let r = w * phi(e, d);
                for (l, c) in st.iter().enumerate() {
                    g[b + l] += r * c;
                }
            }
        }
        for (i, (o, &xi)) in out.iter_mut().zip(x).enumerate() {
            let k = self.site(i);
            *o = g[i + n] + p.v(k) * phi(p.q, xi) - p.lambda * p.nonlinearity.f(k, xi);
        }
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let p = self.problem;
        let n = p.order();
        let dim = x.len();
        let u = self.padded(x);
        let mut h = DMatrix::zeros(dim, dim);
        for m in 1..=n {
            let st = difference_stencil(m);
            let e = p.exponents[m - 1];
            let w = p.weight(m);
            for b in 0..u.len() - m {
                let d: f64 = st.iter().zip(&u[b..]).map(|(c, x)| c * x).sum();
                let curv = w * phi_prime(e, d).min(CURVATURE_CAP);
                for (l1, c1) in st.iter().enumerate() {
                    let Some(i1) = (b + l1).checked_sub(n).filter(|&i| i < dim) else {
                        continue;
                    };
                    for (l2, c2) in st.iter().enumerate() {
                        if let Some(i2) = (b + l2).checked_sub(n).filter(|&i| i < dim) {
                            h[(i1, i2)] += curv * c1 * c2;
                        }
                    }
                }
            }
        }
        for (i, &xi) in x.iter().enumerate() {
            let k = self.site(i);
            h[(i, i)] += p.v(k) * phi_prime(p.q, xi).min(CURVATURE_CAP)
                - p.lambda * p.nonlinearity.df(k, xi);
        }
        h
    }

    fn path_norm(&self, x: &[f64]) -> f64 {
        let q = self.problem.q.value();
        x.iter()
            .enumerate()
            .map(|(i, u)| self.problem.v(self.site(i)) * u.abs().powf(q))
            .sum::<f64>()
            .powf(1.0 / q)
    }

    fn residual_norm(&self, x: &[f64]) -> f64 {
        let u = self.to_lattice(x);
        residual(&u, self.problem)
            .map(|r| r.sup_norm())
            .unwrap_or(f64::INFINITY)
    }

    fn to_lattice(&self, x: &[f64]) -> LatticeFunction {
        let (lo, _) = self.problem.window(self.n_half);
        LatticeFunction::new(lo, self.padded(x)).expect("finite state")
    }
}

impl CoercivityTarget for Truncation<'_> {
    fn exponent_q(&self) -> f64 {
        self.problem.q.value()
    }
    fn energy(&self, x: &[f64]) -> f64 {
        self.value(x)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        Objective::gradient(self, x, out)
    }
    fn weighted_norm_pow(&self, x: &[f64]) -> f64 {
        self.path_norm(x).powf(self.exponent_q()) / self.exponent_q()
    }
}

fn check_padding(u: &LatticeFunction, problem: &HomoclinicProblem) -> Result<usize> {
    let n = problem.order();
    let len = u.len();
    if len < 2 * n + 1 || (len - 2 * n).is_multiple_of(2) {
        return Err(Error::domain(format!(
            "window of length {len} is not [-N-{n}, N+{n}]"
        )));
    }
    let n_half = (len - 2 * n - 1) / 2;
    if u.window_lo() != -((n_half + n) as i64) {
        return Err(Error::domain("window is not centered at 0"));
    }
    let v = u.values();
    if v[..n].iter().chain(&v[len - n..]).any(|x| *x != 0.0) {
        return Err(Error::domain("state must vanish on the padding sites"));
    }
    Ok(n_half)
}

/// `J` on a truncated state. `u` lives on `[-N-n, N+n]` and vanishes on the padding.
pub fn j_home(u: &LatticeFunction, problem: &HomoclinicProblem) -> Result<f64> {
    let n_half = check_padding(u, problem)?;
    let t = problem.truncate(n_half);
    Ok(t.value(&t.free_of(u)?))
}

/// Gradient of `J` on `[-N, N]`, from the stencil adjoints.
pub fn grad_home(u: &LatticeFunction, problem: &HomoclinicProblem) -> Result<LatticeFunction> {
    let n_half = check_padding(u, problem)?;
    let t = problem.truncate(n_half);
    let x = t.free_of(u)?;
    let mut g = vec![0.0; x.len()];
    Objective::gradient(&t, &x, &mut g);
    LatticeFunction::new(-(n_half as i64), g)
}

/// The equation residual on `[-N, N]` in strong form,
/// `Σ_m (-1)^m w_m Δ^m(φ_{p_m}(Δ^m u(k-m))) + V(k)φ_q(u(k)) - λ f(k, u(k))`,
/// which for `n = 2` is `Δ²(φ_{p₂}(Δ²u(k-2))) - aΔ(φ_{p₁}(Δu(k-1))) + ...`.
pub fn residual(u: &LatticeFunction, problem: &HomoclinicProblem) -> Result<LatticeFunction> {
    let n_half = check_padding(u, problem)? as i64;
    let mut r = vec![0.0; (2 * n_half + 1) as usize];
    for m in 1..=problem.order() {
        let e = problem.exponents[m - 1];
        let flux = iterated_diff(u, m)?.map(|d| phi(e, d))?;
        let outer = iterated_diff(&flux, m)?;
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        for (i, k) in (-n_half..=n_half).enumerate() {
            r[i] += sign * problem.weight(m) * outer.at(k - m as i64);
        }
    }
    for (i, k) in (-n_half..=n_half).enumerate() {
        let x = u.at(k);
        r[i] += problem.v(k) * phi(problem.q, x) - problem.lambda * problem.nonlinearity.f(k, x);
    }
    LatticeFunction::new(-n_half, r)
}

/// `result(k) = u(k + shift)` on the same window.
///
/// `shift` should be a multiple of the period for the energy to be preserved.
/// Fails if nonzero values would leave the free block.
pub fn translate(
    u: &LatticeFunction,
    shift: i64,
    problem: &HomoclinicProblem,
) -> Result<LatticeFunction> {
    translate_within(u, shift, problem, 0.0)
}

/// [`translate`], tolerating clipped values up to `clip_tol` in magnitude.
pub fn translate_within(
    u: &LatticeFunction,
    shift: i64,
    problem: &HomoclinicProblem,
    clip_tol: f64,
) -> Result<LatticeFunction> {
    let (out, clipped) = translate_clipping(u, shift, problem)?;
    if clipped > clip_tol {
        return Err(Error::domain(format!(
            "translation by {shift} clips support (lost values up to {clipped:e})"
        )));
    }
    Ok(out)
}

fn translate_clipping(
    u: &LatticeFunction,
    shift: i64,
    problem: &HomoclinicProblem,
) -> Result<(LatticeFunction, f64)> {
    let n_half = check_padding(u, problem)? as i64;
    let mut clipped = 0.0f64;
    for k in -n_half..=n_half {
        let target = k - shift;
        if target.abs() > n_half {
            clipped = clipped.max(u.at(k).abs());
        }
    }
    let lo = u.window_lo();
    let out = LatticeFunction::from_fn(lo, u.window_hi(), |k| {
        if k.abs() <= n_half && (k + shift).abs() <= n_half {
            u.at(k + shift)
        } else {
            0.0
        }
    })?;
    Ok((out, clipped))
}

/// Checks `Σ|Δ²u(k-2)|^{p₂}/p₂ <= (4^{p₂}/p₂) Σ|u(k)|^{p₂}` and
/// `Σ|Δu(k-1)|^{p₁} <= 2^{p₁} Σ|u(k)|^{p₁}` for a finitely supported `u`.
pub fn embedding_bound_check(u: &LatticeFunction, p1: Exponent, p2: Exponent) -> bool {
    // pad so that every difference touching the support is counted
    let lo = u.window_lo() - 2;
    let hi = u.window_hi() + 2;
    let w = LatticeFunction::from_fn(lo, hi, |k| u.get_or_zero(k)).expect("finite state");
    let sum_pow = |p: f64| w.values().iter().map(|x| x.abs().powf(p)).sum::<f64>();
    let (a, b) = (p1.value(), p2.value());
    let d2: f64 = iterated_diff(&w, 2)
        .map(|d| d.values().iter().map(|x| phi_antideriv(p2, *x)).sum())
        .unwrap_or(0.0);
    let d1: f64 = iterated_diff(&w, 1)
        .map(|d| d.values().iter().map(|x| x.abs().powf(a)).sum())
        .unwrap_or(0.0);
    let tol = |r: f64| 1e-12 * r.abs().max(1.0);
    let r2 = 4f64.powf(b) / b * sum_pow(b);
    let r1 = 2f64.powf(a) * sum_pow(a);
    d2 <= r2 + tol(r2) && d1 <= r1 + tol(r1)
}

/// A state `t·u₀` with negative energy, scanning `t = 0.1·2^j` up to `10⁶` over
/// a unit spike at `0` and the bump `exp(-(k/3)²)`.
pub fn find_ascent_endpoint(problem: &HomoclinicProblem, n_half: usize) -> Result<LatticeFunction> {
    let t = problem.truncate(n_half);
    let dim = t.dim();
    let center = n_half;
    let mut spike = vec![0.0; dim];
    spike[center] = 1.0;
    let bump: Vec<f64> = (0..dim)
        .map(|i| {
            let k = i as f64 - center as f64;
            (-(k / 3.0).powi(2)).exp()
        })
        .collect();
    let mut s = 0.1;
    while s <= 1e6 {
        for dir in [&spike, &bump] {
            let x: Vec<f64> = dir.iter().map(|v| s * v).collect();
            if t.value(&x) < 0.0 {
                return Ok(t.to_lattice(&x));
            }
        }
        s *= 2.0;
    }
    Err(Error::domain("no negative-energy state found"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HomoclinicOptions {
    pub tail_tol: f64,
    pub nontrivial_floor: f64,
}

impl Default for HomoclinicOptions {
    fn default() -> Self {
        HomoclinicOptions {
            tail_tol: 1e-6,
            nontrivial_floor: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    #[serde(rename = "N")]
    pub n: usize,
    /// `max |u(k)|` over the outer 10% of `[-N, N]`.
    pub tail_max: f64,
    pub energy: f64,
    /// The numerical min-max level; equals `energy` for an accepted point.
    pub mp_level: f64,
    pub grad_norm: f64,
    pub residual_norm: f64,
    pub sup_norm: f64,
    /// Multiple of the period the solution was shifted by when centering.
    pub center_shift: i64,
    pub accepted: bool,
    pub failure: Option<String>,
}

#[derive(Debug, Clone)]
pub struct HomoclinicLevel {
    pub report: TruncationReport,
    pub point: Option<CriticalPoint>,
    /// Path nodes visited by the mountain-pass iteration.
    pub trace: Vec<LatticeFunction>,
}

#[derive(Debug, Clone)]
pub struct HomoclinicOutcome {
    pub levels: Vec<HomoclinicLevel>,
    pub status: Status,
    /// Sup-norm distances between centered solutions at consecutive `N`.
    pub successive_differences: Vec<f64>,
}

/// `max |u(k)|` over the sites with `|k| > N - ceil(N/10)`.
pub fn tail_max(u: &LatticeFunction, n_half: usize) -> f64 {
    let band = n_half.div_ceil(10).max(1) as i64;
    let n = n_half as i64;
    (-n..=n)
        .filter(|k| k.abs() > n - band)
        .map(|k| u.at(k).abs())
        .fold(0.0, f64::max)
}

fn solve_level(
    problem: &HomoclinicProblem,
    n_half: usize,
    config: &SolverConfig,
    options: &HomoclinicOptions,
) -> HomoclinicLevel {
    let t = problem.truncate(n_half);
    let fail = |why: String| HomoclinicLevel {
        report: TruncationReport {
            n: n_half,
            tail_max: f64::NAN,
            energy: f64::NAN,
            mp_level: f64::NAN,
            grad_norm: f64::NAN,
            residual_norm: f64::NAN,
            sup_norm: f64::NAN,
            center_shift: 0,
            accepted: false,
            failure: Some(why),
        },
        point: None,
        trace: Vec::new(),
    };
    let e = match find_ascent_endpoint(problem, n_half) {
        Ok(e) => e,
        Err(err) => return fail(err.to_string()),
    };
    let e_free = t.free_of(&e).expect("endpoint lives on the window");
    let zero = vec![0.0; t.dim()];
    let mp = match mountain_pass(&t, &zero, &e_free, config) {
        Ok(mp) => mp,
        Err(SolverError::NotConverged { best, .. }) => {
            let mut lvl = fail("mountain pass did not converge".into());
            lvl.report.grad_norm = best.grad_norm;
            lvl.report.mp_level = best.energy;
            return lvl;
        }
        Err(err) => return fail(err.to_string()),
    };
    let trace: Vec<LatticeFunction> = mp.trace.iter().map(|x| t.to_lattice(x)).collect();
    let mut cp = mp.saddle;
    let mp_level = cp.energy;

    // canonical representative: the max-|u| site moved into [0, T-1]
    let period = problem.period() as i64;
    let argmax = cp.u.iter().fold((0i64, -1.0f64), |b, (k, v)| {
        if v.abs() > b.1 {
            (k, v.abs())
        } else {
            b
        }
    });
    let shift = period * argmax.0.div_euclid(period);
    if shift != 0 {
        if let Ok((moved, _)) = translate_clipping(&cp.u, shift, problem) {
            let x = t.free_of(&moved).expect("same window");
            let mut g = vec![0.0; x.len()];
            Objective::gradient(&t, &x, &mut g);
            cp.grad_norm = g.iter().fold(0.0, |m, v| m.max(v.abs()));
            cp.residual_norm = t.residual_norm(&x);
            cp.energy = t.value(&x);
            cp.u = moved;
        }
    }
    let tail = tail_max(&cp.u, n_half);
    let sup = cp.u.sup_norm();
    let mut failure = None;
    if cp.residual_norm > config.grad_tol {
        failure = Some(format!("residual {:e} above tolerance", cp.residual_norm));
    } else if tail > options.tail_tol {
        failure = Some(format!("tail_max {tail:e} above {:e}", options.tail_tol));
    } else if sup < options.nontrivial_floor {
        failure = Some(format!("solution is trivial (|u| = {sup:e})"));
    }
    HomoclinicLevel {
        report: TruncationReport {
            n: n_half,
            tail_max: tail,
            energy: cp.energy,
            mp_level,
            grad_norm: cp.grad_norm,
            residual_norm: cp.residual_norm,
            sup_norm: sup,
            center_shift: shift,
            accepted: failure.is_none(),
            failure,
        },
        point: Some(cp),
        trace,
    }
}

/// Mountain pass between `0` and [`find_ascent_endpoint`] for every `N` in the schedule.
///
/// The run is successful when the largest `N` is accepted.
pub fn solve_homoclinic(
    problem: &HomoclinicProblem,
    schedule: &[usize],
    config: &SolverConfig,
    options: &HomoclinicOptions,
) -> Result<HomoclinicOutcome> {
    if schedule.is_empty() || schedule.windows(2).any(|w| w[0] >= w[1]) || schedule[0] == 0 {
        return Err(Error::domain(
            "N schedule must be nonempty, positive and increasing",
        ));
    }
    config
        .validate()
        .map_err(|e| Error::domain(e.to_string()))?;
    use rayon::prelude::*;
    let levels: Vec<HomoclinicLevel> = schedule
        .par_iter()
        .map(|&n| solve_level(problem, n, config, options))
        .collect();
    let successive_differences = levels
        .windows(2)
        .map(|w| match (&w[0].point, &w[1].point) {
            (Some(a), Some(b)) => a.u.sup_distance(&b.u),
            _ => f64::NAN,
        })
        .collect();
    let status = if levels.last().is_some_and(|l| l.report.accepted) {
        Status::Success
    } else {
        Status::Partial
    };
    Ok(HomoclinicOutcome {
        levels,
        status,
        successive_differences,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::{PowerFamily, Zero};
    use std::sync::Arc;

    fn e(v: f64) -> Exponent {
        Exponent::new(v).unwrap()
    }

    fn linear_problem(lambda: f64) -> HomoclinicProblem {
        HomoclinicProblem::new(
            e(2.0),
            e(2.0),
            e(2.0),
            1.0,
            vec![1.0],
            Arc::new(Zero),
            lambda,
            e(4.0),
            1.0,
        )
        .unwrap()
    }

    fn example1() -> HomoclinicProblem {
        let nl = PowerFamily::new(vec![1.0, 1.0], e(4.0)).unwrap();
        HomoclinicProblem::new(
            e(2.0),
            e(2.0),
            e(2.0),
            1.0,
            vec![1.0, 2.0],
            Arc::new(nl),
            1.0,
            e(4.0),
            1.0,
        )
        .unwrap()
    }

    fn spike(n_half: usize, height: f64) -> LatticeFunction {
        let w = (n_half + 2) as i64;
        LatticeFunction::from_fn(-w, w, |k| if k == 0 { height } else { 0.0 }).unwrap()
    }

    #[test]
    fn spike_energy() {
        let p = linear_problem(0.0);
        assert!((j_home(&spike(5, 1.0), &p).unwrap() - 4.5).abs() < 1e-14);
        assert_eq!(j_home(&spike(5, 0.0), &p).unwrap(), 0.0);
    }

    #[test]
    fn padding_is_enforced() {
        let p = linear_problem(0.0);
        let bad = LatticeFunction::from_fn(-7, 7, |_| 1.0).unwrap();
        assert!(j_home(&bad, &p).is_err());
    }

    #[test]
    fn strong_and_adjoint_residuals_agree() {
        let p = example1();
        let w = 10i64;
        let u = LatticeFunction::from_fn(-w, w, |k| {
            if k.abs() > 8 {
                0.0
            } else {
                (0.7 * k as f64).sin() + 0.1 * k as f64
            }
        })
        .unwrap();
        let a = grad_home(&u, &p).unwrap();
        let b = residual(&u, &p).unwrap();
        assert!(a.sup_distance(&b) < 1e-12);
    }

    #[test]
    fn embedding_spike() {
        assert!(embedding_bound_check(&spike(3, 1.0), e(2.0), e(2.0)));
        assert!(embedding_bound_check(&spike(3, 0.0), e(2.0), e(3.0)));
    }

    #[test]
    fn translate_identity_and_clip() {
        let p = example1();
        let u = spike(6, 2.0);
        assert_eq!(translate(&u, 0, &p).unwrap(), u);
        let moved = translate(&u, -2, &p).unwrap();
        assert_eq!(moved.at(2), 2.0);
        assert!(translate(&u, 8, &p).is_err());
    }

    #[test]
    fn no_ascent_without_potential() {
        assert!(find_ascent_endpoint(&linear_problem(0.0), 8).is_err());
        let e = find_ascent_endpoint(&example1(), 8).unwrap();
        assert!(j_home(&e, &example1()).unwrap() < 0.0);
    }

    #[test]
    fn exponent_orderings_are_validated() {
        let nl: SharedNonlinearity = Arc::new(Zero);
        assert!(HomoclinicProblem::new(
            e(2.0),
            e(2.0),
            e(3.0),
            1.0,
            vec![1.0],
            nl.clone(),
            1.0,
            e(4.0),
            1.0
        )
        .is_err());
        assert!(HomoclinicProblem::new(
            e(2.0),
            e(4.0),
            e(2.0),
            1.0,
            vec![1.0],
            nl.clone(),
            1.0,
            e(4.0),
            1.0
        )
        .is_err());
        assert!(HomoclinicProblem::new(
            e(2.0),
            e(2.0),
            e(2.0),
            0.0,
            vec![1.0],
            nl,
            1.0,
            e(4.0),
            1.0
        )
        .is_err());
    }
}
