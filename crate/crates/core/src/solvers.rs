//! Critical-point machinery: local minimization, a string-type mountain-pass
//! method and deflated multi-start.
//!
//! Everything works on free coordinates through [`Objective`]; the lattice
//! layout is only used when reporting.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bvp::{embed_state, norm_x, residual_sup, BvpProblem};
use crate::lattice::LatticeFunction;

/// A smooth energy on `R^dim`.
///
/// Implementations must be reentrant: multi-start evaluates them from several
/// threads at once.
pub trait Objective: Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64], out: &mut [f64]);

    /// Defaults to central differences of the gradient, symmetrized.
    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let mut h = DMatrix::zeros(n, n);
        let mut xp = x.to_vec();
        let (mut gp, mut gm) = (vec![0.0; n], vec![0.0; n]);
        for j in 0..n {
            let step = 1e-6 * x[j].abs().max(1.0);
            xp[j] = x[j] + step;
            self.gradient(&xp, &mut gp);
            xp[j] = x[j] - step;
            self.gradient(&xp, &mut gm);
            xp[j] = x[j];
            for i in 0..n {
                h[(i, j)] = (gp[i] - gm[i]) / (2.0 * step);
            }
        }
        (&h + h.transpose()) * 0.5
    }

    /// Norm used for path arclength in the mountain-pass method.
    fn path_norm(&self, x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Sup-norm of the equation residual, by an evaluator independent of
    /// [`Objective::gradient`] when one exists.
    fn residual_norm(&self, x: &[f64]) -> f64 {
        let mut g = vec![0.0; self.dim()];
        self.gradient(x, &mut g);
        sup(&g)
    }

    /// The lattice function represented by `x`.
    fn to_lattice(&self, x: &[f64]) -> LatticeFunction {
        LatticeFunction::new(1, x.to_vec()).expect("finite state")
    }

    /// Inverse of [`Objective::to_lattice`]: the values on the non-padding sites,
    /// assuming equal padding at both ends.
    fn free_coordinates(&self, u: &LatticeFunction) -> Vec<f64> {
        let pad = (u.len() - self.dim()) / 2;
        u.values()[pad..pad + self.dim()].to_vec()
    }
}

/// An [`Objective`] built from closures.
pub struct FnObjective<F, G> {
    dim: usize,
    f: F,
    g: G,
}

impl<F, G> FnObjective<F, G>
where
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64], &mut [f64]) + Sync,
{
    pub fn new(dim: usize, f: F, g: G) -> Self {
        FnObjective { dim, f, g }
    }
}

impl<F, G> Objective for FnObjective<F, G>
where
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64], &mut [f64]) + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        (self.g)(x, out)
    }
}

impl Objective for BvpProblem {
    fn dim(&self) -> usize {
        self.t_len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.energy_free(x)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        self.gradient_free(x, out)
    }
    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        self.hessian_free(x)
    }
    fn path_norm(&self, x: &[f64]) -> f64 {
        embed_state(x, self).map_or(f64::INFINITY, |u| norm_x(&u, self))
    }
    fn residual_norm(&self, x: &[f64]) -> f64 {
        embed_state(x, self).map_or(f64::INFINITY, |u| residual_sup(&u, self))
    }
    fn to_lattice(&self, x: &[f64]) -> LatticeFunction {
        embed_state(x, self).expect("finite state").into_lattice()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    LocalMin,
    MountainPassSaddle,
    Unclassified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub u: LatticeFunction,
    pub energy: f64,
    /// Sup-norm of the gradient.
    pub grad_norm: f64,
    /// Sup-norm of the residual from the independent evaluator.
    pub residual_norm: f64,
    pub kind: Kind,
    /// Number of negative Hessian eigenvalues.
    pub morse_index: usize,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub grad_tol: f64,
    pub max_iters: usize,
    pub path_nodes: usize,
    /// Minimum sup-norm separation of accepted points.
    pub deflation_radius: f64,
    pub multistart_count: usize,
    pub seed: u64,
    /// Random starts are drawn uniformly from `[-start_radius, start_radius]^dim`.
    pub start_radius: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            grad_tol: 1e-8,
            max_iters: 100_000,
            path_nodes: 41,
            deflation_radius: 1e-4,
            multistart_count: 64,
            seed: 0,
            start_radius: 20.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let ok = self.grad_tol > 0.0
            && self.max_iters > 0
            && self.path_nodes >= 3
            && self.deflation_radius > 0.0
            && self.start_radius > 0.0;
        if ok {
            Ok(())
        } else {
            Err(SolverError::Config(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("not converged after {iterations} iterations (gradient sup-norm {grad_norm:e})")]
    NotConverged {
        iterations: usize,
        grad_norm: f64,
        best: Box<CriticalPoint>,
    },
    #[error("no barrier detected")]
    NoBarrier,
    #[error("objective is not finite at the start state")]
    NonFinite,
    #[error("invalid solver configuration: {0}")]
    Config(String),
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(x: &[f64], t: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + t * b).collect()
}

fn grad<O: Objective + ?Sized>(obj: &O, x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; obj.dim()];
    obj.gradient(x, &mut g);
    g
}

/// Morse index with eigenvalues below `-1e-6 · max(1, max |eig|)` counted negative.
pub fn morse_index(h: &DMatrix<f64>) -> usize {
    if h.nrows() == 0 {
        return 0;
    }
    let eig = SymmetricEigen::new(h.clone()).eigenvalues;
    let scale = eig.iter().fold(1.0f64, |m, e| m.max(e.abs()));
    eig.iter().filter(|e| **e < -1e-6 * scale).count()
}

fn assemble<O: Objective + ?Sized>(
    obj: &O,
    x: &[f64],
    iterations: usize,
    kind: Option<Kind>,
) -> CriticalPoint {
    let g = grad(obj, x);
    let mi = morse_index(&obj.hessian(x));
    let kind = kind.unwrap_or(if mi == 0 {
        Kind::LocalMin
    } else {
        Kind::Unclassified
    });
    CriticalPoint {
        u: obj.to_lattice(x),
        energy: obj.value(x),
        grad_norm: sup(&g),
        residual_norm: obj.residual_norm(x),
        kind,
        morse_index: mi,
        iterations,
    }
}

/// Levenberg–Marquardt on `∇J = 0` with Jacobian the Hessian; finds critical
/// points of any Morse index. Returns the final iterate and iteration count.
fn lm_root<O: Objective + ?Sized>(
    obj: &O,
    x0: &[f64],
    tol: f64,
    max_iters: usize,
) -> (Vec<f64>, usize) {
    let n = obj.dim();
    let mut x = x0.to_vec();
    let mut g = grad(obj, &x);
    let mut merit = dot(&g, &g);
    let mut mu: f64 = 1e-3;
    let mut it = 0;
    while it < max_iters && sup(&g) > tol && merit.is_finite() {
        it += 1;
        let h = obj.hessian(&x);
        let gv = DVector::from_column_slice(&g);
        // plain Newton first; it converges quadratically near nondegenerate points
        let mut accepted = false;
        if let Some(step) = h.clone().lu().solve(&(-&gv)) {
            let xn = axpy(&x, 1.0, step.as_slice());
            let gn = grad(obj, &xn);
            let mn = dot(&gn, &gn);
            if mn.is_finite() && mn < merit {
                x = xn;
                g = gn;
                merit = mn;
                mu = (mu * 0.3).max(1e-12);
                accepted = true;
            }
        }
        if accepted {
            continue;
        }
        let jtj = h.transpose() * &h;
        let jtg = h.transpose() * &gv;
        let diag_scale = (0..n).fold(0.0f64, |m, i| m.max(jtj[(i, i)])).max(1e-300);
        let mut improved = false;
        for _ in 0..40 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += mu * diag_scale;
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&jtg))) else {
                mu *= 10.0;
                continue;
            };
            let xn = axpy(&x, 1.0, step.as_slice());
            let gn = grad(obj, &xn);
            let mn = dot(&gn, &gn);
            if mn.is_finite() && mn < merit {
                x = xn;
                g = gn;
                merit = mn;
                mu = (mu * 0.3).max(1e-12);
                improved = true;
                break;
            }
            mu *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (x, it)
}

/// BFGS with Armijo backtracking, finished by a Newton polish on the gradient.
///
/// Falls back to steepest descent whenever the quasi-Newton direction is not a
/// descent direction.
pub fn minimize_local<O: Objective + ?Sized>(
    obj: &O,
    u0: &[f64],
    config: &SolverConfig,
) -> Result<CriticalPoint, SolverError> {
    let n = obj.dim();
    let mut x = u0.to_vec();
    let mut f = obj.value(&x);
    if !f.is_finite() {
        return Err(SolverError::NonFinite);
    }
    let mut g = grad(obj, &x);
    let mut hinv = DMatrix::<f64>::identity(n, n);
    let mut first = true;
    let mut it = 0;
    while it < config.max_iters && sup(&g) > config.grad_tol {
        it += 1;
        let gv = DVector::from_column_slice(&g);
        let mut d: Vec<f64> = (-(&hinv * &gv)).as_slice().to_vec();
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            d = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
            hinv = DMatrix::identity(n, n);
            first = true;
        }
        if first {
            // keep the first step comparable to the state scale
            let dn = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            let cap = x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
            if dn > cap {
                let s = cap / dn;
                d.iter_mut().for_each(|v| *v *= s);
                slope *= s;
            }
        }
        let mut alpha = 1.0;
        let mut next = None;
        while alpha > 1e-20 {
            let xn = axpy(&x, alpha, &d);
            let fnew = obj.value(&xn);
            if fnew.is_finite() && fnew <= f + 1e-4 * alpha * slope {
                next = Some((xn, fnew));
                break;
            }
            alpha *= 0.5;
        }
        let Some((xn, fnew)) = next else { break };
        let gn = grad(obj, &xn);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if first {
                hinv = DMatrix::identity(n, n) * (sy / dot(&y, &y));
                first = false;
            }
            let sv = DVector::from_column_slice(&s);
            let yv = DVector::from_column_slice(&y);
            let rho = 1.0 / sy;
            let hy = &hinv * &yv;
            let yhy = yv.dot(&hy);
            hinv += (&sv * sv.transpose()) * (rho * rho * yhy + rho)
                - (&hy * sv.transpose() + &sv * hy.transpose()) * rho;
        }
        let stalled = (f - fnew).abs() <= 1e-15 * f.abs().max(1.0);
        x = xn;
        f = fnew;
        g = gn;
        if stalled {
            break;
        }
    }
    if sup(&g) > config.grad_tol {
        let (xp, extra) = lm_root(obj, &x, config.grad_tol, 200);
        let gp = grad(obj, &xp);
        // keep the polished point only if it stayed in the same basin
        if sup(&gp) < sup(&g) && obj.value(&xp) <= f + 1e-8 * f.abs().max(1.0) {
            x = xp;
            g = gp;
        }
        it += extra;
    }
    let cp = assemble(obj, &x, it, None);
    if sup(&g) <= config.grad_tol {
        Ok(cp)
    } else {
        Err(SolverError::NotConverged {
            iterations: it,
            grad_norm: cp.grad_norm,
            best: Box::new(cp),
        })
    }
}

/// Damped Newton / Levenberg–Marquardt search for a zero of the gradient.
pub fn newton_critical_point<O: Objective + ?Sized>(
    obj: &O,
    u0: &[f64],
    config: &SolverConfig,
) -> Result<CriticalPoint, SolverError> {
    if !obj.value(u0).is_finite() {
        return Err(SolverError::NonFinite);
    }
    let (x, it) = lm_root(obj, u0, config.grad_tol, config.max_iters.min(500));
    let cp = assemble(obj, &x, it, None);
    if cp.grad_norm <= config.grad_tol {
        Ok(cp)
    } else {
        Err(SolverError::NotConverged {
            iterations: it,
            grad_norm: cp.grad_norm,
            best: Box::new(cp),
        })
    }
}

/// A discrete path of states from `nodes[0]` to `nodes[M-1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub nodes: Vec<Vec<f64>>,
}

impl Path {
    pub fn linear(start: &[f64], end: &[f64], m: usize) -> Self {
        let m = m.max(3);
        let nodes = (0..m)
            .map(|i| {
                let s = i as f64 / (m - 1) as f64;
                start
                    .iter()
                    .zip(end)
                    .map(|(a, b)| a + s * (b - a))
                    .collect()
            })
            .collect();
        Path { nodes }
    }

    /// Piecewise-linear arclength reparametrization to equal spacing in `norm`.
    pub fn equidistribute(&mut self, norm: impl Fn(&[f64]) -> f64) {
        let m = self.nodes.len();
        let mut cum = vec![0.0; m];
        for i in 1..m {
            let diff: Vec<f64> = self.nodes[i]
                .iter()
                .zip(&self.nodes[i - 1])
                .map(|(a, b)| a - b)
                .collect();
            cum[i] = cum[i - 1] + norm(&diff);
        }
        let total = cum[m - 1];
        if !(total > 0.0 && total.is_finite()) {
            return;
        }
        let mut out = Vec::with_capacity(m);
        out.push(self.nodes[0].clone());
        let mut seg = 1;
        for j in 1..m - 1 {
            let target = total * j as f64 / (m - 1) as f64;
            while seg < m - 1 && cum[seg] < target {
                seg += 1;
            }
            let len = cum[seg] - cum[seg - 1];
            let s = if len > 0.0 {
                (target - cum[seg - 1]) / len
            } else {
                0.0
            };
            let (a, b) = (&self.nodes[seg - 1], &self.nodes[seg]);
            out.push(a.iter().zip(b).map(|(x, y)| x + s * (y - x)).collect());
        }
        out.push(self.nodes[m - 1].clone());
        self.nodes = out;
    }
}

const TRACE_CAP: usize = 1024;

#[derive(Debug, Clone)]
pub struct MountainPass {
    pub saddle: CriticalPoint,
    pub path: Path,
    /// Interior path nodes after each sweep, in order, capped at 1024 states.
    pub trace: Vec<Vec<f64>>,
    pub sweeps: usize,
}

/// String-type mountain-pass search between `low` and `high`.
///
/// Interior nodes descend along `-∇J` with per-node Armijo steps and are
/// re-equidistributed in [`Objective::path_norm`] after every sweep. Every few
/// sweeps the highest node is polished by a Newton search; the result is
/// accepted when it has Morse index at least 1 and energy at least the larger
/// endpoint energy.
pub fn mountain_pass<O: Objective + ?Sized>(
    obj: &O,
    low: &[f64],
    high: &[f64],
    config: &SolverConfig,
) -> Result<MountainPass, SolverError> {
    let (f_low, f_high) = (obj.value(low), obj.value(high));
    if !(f_low.is_finite() && f_high.is_finite()) {
        return Err(SolverError::NonFinite);
    }
    let sep = low
        .iter()
        .zip(high)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if sep <= 1e-14 * sup(low).max(1.0) {
        return Err(SolverError::NoBarrier);
    }
    let floor = f_low.max(f_high);
    let m = config.path_nodes.max(3);
    let mut path = Path::linear(low, high, m);
    let mut steps = vec![1e-2f64; m];
    let mut trace = Vec::new();
    let max_sweeps = config.max_iters.min(20_000);
    let mut best: Option<CriticalPoint> = None;
    for sweep in 1..=max_sweeps {
        // each node reads both neighbours
        #[allow(clippy::needless_range_loop)]
        for i in 1..m - 1 {
            let x = &path.nodes[i];
            let f = obj.value(x);
            let g = grad(obj, x);
            let gg = dot(&g, &g);
            if gg == 0.0 {
                continue;
            }
            // a node may not travel further than half the distance to its
            // neighbours, otherwise it can hop over the barrier
            let gap = |j: usize| {
                path.nodes[j]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            };
            let reach = 0.5 * gap(i - 1).min(gap(i + 1)) / gg.sqrt();
            let mut a = (steps[i] * 2.0).min(reach);
            let mut moved = false;
            for _ in 0..60 {
                let xn = axpy(x, -a, &g);
                let fnew = obj.value(&xn);
                if fnew.is_finite() && fnew <= f - 1e-4 * a * gg {
                    path.nodes[i] = xn;
                    moved = true;
                    break;
                }
                a *= 0.5;
            }
            steps[i] = if moved { a } else { steps[i] * 0.5 };
        }
        path.equidistribute(|d| obj.path_norm(d));
        let energies: Vec<f64> = path.nodes.iter().map(|x| obj.value(x)).collect();
        let imax = (0..m)
            .max_by(|&i, &j| energies[i].total_cmp(&energies[j]).then(j.cmp(&i)))
            .unwrap_or(0);
        if imax == 0 || imax == m - 1 {
            return Err(SolverError::NoBarrier);
        }
        for node in &path.nodes[1..m - 1] {
            if trace.len() < TRACE_CAP {
                trace.push(node.clone());
            }
        }
        if sweep % 10 == 0 || sweep == max_sweeps {
            let (xp, _) = lm_root(obj, &path.nodes[imax], config.grad_tol, 100);
            let near = |e: &[f64]| {
                xp.iter()
                    .zip(e)
                    .all(|(a, b)| (a - b).abs() <= 1e-6 * b.abs().max(1.0))
            };
            if near(low) || near(high) {
                // the highest node slid into an endpoint basin: the path collapsed
                return Err(SolverError::NoBarrier);
            }
            let cp = assemble(obj, &xp, sweep, Some(Kind::MountainPassSaddle));
            if cp.grad_norm <= config.grad_tol && cp.morse_index >= 1 && cp.energy >= floor - 1e-10
            {
                return Ok(MountainPass {
                    saddle: cp,
                    path,
                    trace,
                    sweeps: sweep,
                });
            }
            let at_max = assemble(
                obj,
                &path.nodes[imax],
                sweep,
                Some(Kind::MountainPassSaddle),
            );
            if best.as_ref().is_none_or(|b| at_max.grad_norm < b.grad_norm) {
                best = Some(at_max);
            }
        }
    }
    let best = best.expect("at least one polish attempt");
    Err(SolverError::NotConverged {
        iterations: max_sweeps,
        grad_norm: best.grad_norm,
        best: Box::new(best),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Success,
    Partial,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    /// Deduplicated critical points sorted by energy.
    pub points: Vec<CriticalPoint>,
    pub status: Status,
    pub starts: usize,
    pub converged_runs: usize,
    pub mountain_pass_runs: usize,
    pub warnings: Vec<String>,
}

struct Candidate {
    cp: CriticalPoint,
    x: Vec<f64>,
    order: usize,
}

fn better(a: &Candidate, b: &Candidate) -> bool {
    a.cp.residual_norm
        .total_cmp(&b.cp.residual_norm)
        .then(a.cp.energy.total_cmp(&b.cp.energy))
        .then(a.order.cmp(&b.order))
        .is_lt()
}

fn deduplicate(cands: Vec<Candidate>, radius: f64) -> Vec<Candidate> {
    let mut kept: Vec<Candidate> = Vec::new();
    for c in cands {
        if let Some(k) = kept
            .iter_mut()
            .find(|k| k.cp.u.sup_distance(&c.cp.u) < radius)
        {
            let saddle =
                k.cp.kind == Kind::MountainPassSaddle || c.cp.kind == Kind::MountainPassSaddle;
            if better(&c, k) {
                *k = c;
            }
            if saddle && k.cp.morse_index > 0 {
                k.cp.kind = Kind::MountainPassSaddle;
            }
        } else {
            kept.push(c);
        }
    }
    kept
}

/// Multi-start minimization and Newton search from `starts`, deflation at
/// `config.deflation_radius`, then mountain passes between distinct minima.
///
/// Results are independent of thread scheduling: runs are merged in start order.
pub fn find_critical_points<O: Objective + ?Sized>(
    obj: &O,
    starts: &[Vec<f64>],
    wanted: usize,
    config: &SolverConfig,
) -> Result<SearchOutcome, SolverError> {
    config.validate()?;
    let runs: Vec<Vec<Candidate>> = starts
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let mut out = Vec::new();
            if let Ok(cp) = minimize_local(obj, s, config) {
                out.push(Candidate {
                    x: obj.free_coordinates(&cp.u),
                    cp,
                    order: 2 * i,
                });
            }
            if let Ok(cp) = newton_critical_point(obj, s, config) {
                out.push(Candidate {
                    x: obj.free_coordinates(&cp.u),
                    cp,
                    order: 2 * i + 1,
                });
            }
            out
        })
        .collect();
    let converged_runs = runs.iter().map(Vec::len).sum();
    let mut cands: Vec<Candidate> = runs.into_iter().flatten().collect();
    cands.retain(|c| c.cp.residual_norm <= config.grad_tol);
    let mut kept = deduplicate(cands, config.deflation_radius);

    let mut minima: Vec<&Candidate> = kept
        .iter()
        .filter(|c| c.cp.kind == Kind::LocalMin)
        .collect();
    minima.sort_by(|a, b| {
        a.cp.energy
            .total_cmp(&b.cp.energy)
            .then(a.order.cmp(&b.order))
    });
    minima.truncate(8);
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = minima
        .iter()
        .enumerate()
        .flat_map(|(i, a)| {
            minima[i + 1..]
                .iter()
                .map(move |b| (a.x.clone(), b.x.clone()))
        })
        .collect();
    let base = 2 * starts.len();
    let mp: Vec<Candidate> = pairs
        .par_iter()
        .enumerate()
        .filter_map(|(j, (a, b))| {
            mountain_pass(obj, a, b, config).ok().map(|r| Candidate {
                x: obj.free_coordinates(&r.saddle.u),
                cp: r.saddle,
                order: base + j,
            })
        })
        .filter(|c| c.cp.residual_norm <= config.grad_tol)
        .collect();
    kept.extend(mp);
    let mut kept = deduplicate(kept, config.deflation_radius);
    kept.sort_by(|a, b| {
        a.cp.energy
            .total_cmp(&b.cp.energy)
            .then(a.order.cmp(&b.order))
    });
    let points: Vec<CriticalPoint> = kept.into_iter().map(|c| c.cp).collect();
    let status = if points.len() >= wanted {
        Status::Success
    } else {
        Status::Partial
    };
    Ok(SearchOutcome {
        status,
        starts: starts.len(),
        converged_runs,
        mountain_pass_runs: pairs.len(),
        warnings: Vec::new(),
        points,
    })
}

/// Seeded random starts in `[-radius, radius]^dim` plus the structured starts
/// `0` and the constant states `±d`, `±d/2`.
pub fn bvp_starts(dim: usize, d: Option<f64>, config: &SolverConfig) -> Vec<Vec<f64>> {
    let mut starts = vec![vec![0.0; dim]];
    if let Some(d) = d {
        for s in [1.0, -1.0, 0.5, -0.5] {
            starts.push(vec![s * d; dim]);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for _ in 0..config.multistart_count {
        starts.push(
            (0..dim)
                .map(|_| rng.gen_range(-config.start_radius..=config.start_radius))
                .collect(),
        );
    }
    starts
}

/// Three-solutions search for `problem` at `lambda`.
///
/// `interval` is the certified λ-interval, if known; a λ outside it only
/// produces a warning.
pub fn find_three(
    problem: &BvpProblem,
    lambda: f64,
    d: Option<f64>,
    interval: Option<(f64, f64)>,
    config: &SolverConfig,
) -> crate::Result<SearchOutcome> {
    let p = problem.with_lambda(lambda)?;
    let starts = bvp_starts(p.t_len(), d, config);
    let mut out = find_critical_points(&p, &starts, 3, config)
        .map_err(|e| crate::Error::Domain(e.to_string()))?;
    if let Some((lo, hi)) = interval {
        if !(lambda > lo && lambda < hi) {
            out.warnings.push(format!(
                "lambda = {lambda} lies outside the certified interval ({lo}, {hi})"
            ));
        }
    }
    if out.status == Status::Partial {
        out.warnings.push(format!(
            "found {} distinct critical point(s), fewer than 3",
            out.points.len()
        ));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistinctnessReport {
    /// Symmetric matrix of pairwise sup-norm distances; empty for fewer than two points.
    pub distances: Vec<Vec<f64>>,
    /// Pairs `(i, j)`, `i < j`, closer than the radius.
    pub flagged: Vec<(usize, usize)>,
}

pub fn distinctness_report(points: &[LatticeFunction], radius: f64) -> DistinctnessReport {
    let n = points.len();
    if n < 2 {
        return DistinctnessReport {
            distances: Vec::new(),
            flagged: Vec::new(),
        };
    }
    let mut distances = vec![vec![0.0; n]; n];
    let mut flagged = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let dij = points[i].sup_distance(&points[j]);
            distances[i][j] = dij;
            distances[j][i] = dij;
            if dij < radius {
                flagged.push((i, j));
            }
        }
    }
    DistinctnessReport { distances, flagged }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(n: usize) -> impl Objective {
        FnObjective::new(
            n,
            |x: &[f64]| x.iter().map(|v| v * v).sum(),
            |x: &[f64], g: &mut [f64]| g.iter_mut().zip(x).for_each(|(g, v)| *g = 2.0 * v),
        )
    }

    fn double_well() -> impl Objective {
        FnObjective::new(
            1,
            |x: &[f64]| (x[0] * x[0] - 1.0).powi(2),
            |x: &[f64], g: &mut [f64]| g[0] = 4.0 * x[0] * (x[0] * x[0] - 1.0),
        )
    }

    #[test]
    fn quadratic_minimum() {
        let obj = quadratic(6);
        let cp = minimize_local(
            &obj,
            &[3.0, -1.0, 0.5, 7.0, -2.0, 1.0],
            &SolverConfig::default(),
        )
        .unwrap();
        assert!(cp.u.sup_norm() <= 1e-8);
        assert!(cp.iterations <= 100);
        assert_eq!(cp.kind, Kind::LocalMin);
    }

    #[test]
    fn not_converged_carries_best_iterate() {
        let obj = quadratic(3);
        let cfg = SolverConfig {
            max_iters: 1,
            grad_tol: 1e-300,
            ..Default::default()
        };
        match minimize_local(&obj, &[1e300, 1.0, 1.0], &cfg) {
            Err(SolverError::NotConverged { best, .. }) => assert_eq!(best.u.len(), 3),
            Err(SolverError::NonFinite) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn double_well_saddle() {
        let obj = double_well();
        let mp = mountain_pass(&obj, &[-1.0], &[1.0], &SolverConfig::default()).unwrap();
        assert!(mp.saddle.u.at(1).abs() < 1e-8);
        assert!((mp.saddle.energy - 1.0).abs() < 1e-12);
        assert_eq!(mp.saddle.kind, Kind::MountainPassSaddle);
        assert_eq!(mp.saddle.morse_index, 1);
    }

    #[test]
    fn degenerate_path_has_no_barrier() {
        let obj = double_well();
        assert_eq!(
            mountain_pass(&obj, &[1.0], &[1.0], &SolverConfig::default()).unwrap_err(),
            SolverError::NoBarrier
        );
        // one well, no barrier between two points on the same slope
        let q = quadratic(1);
        assert_eq!(
            mountain_pass(&q, &[0.0], &[2.0], &SolverConfig::default()).unwrap_err(),
            SolverError::NoBarrier
        );
    }

    #[test]
    fn equidistribution_gives_equal_spacing() {
        let mut p = Path {
            nodes: vec![vec![0.0], vec![0.1], vec![0.2], vec![3.0], vec![4.0]],
        };
        p.equidistribute(|d| d[0].abs());
        let xs: Vec<f64> = p.nodes.iter().map(|n| n[0]).collect();
        for (i, x) in xs.iter().enumerate() {
            assert!((x - i as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn distinctness() {
        let a = LatticeFunction::new(0, vec![1.0, 2.0]).unwrap();
        let r = distinctness_report(&[a.clone(), a.clone()], 1e-4);
        assert_eq!(r.distances[0][1], 0.0);
        assert_eq!(r.flagged, vec![(0, 1)]);
        assert!(distinctness_report(&[a], 1e-4).distances.is_empty());
    }

    #[test]
    fn morse_index_counts_negative_directions() {
        let h = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, -3.0]);
        assert_eq!(morse_index(&h), 1);
        assert_eq!(morse_index(&DMatrix::identity(3, 3)), 0);
    }

    #[test]
    fn fd_hessian_of_quadratic() {
        let h = quadratic(3).hessian(&[0.3, 0.1, -2.0]);
        assert!((h - DMatrix::identity(3, 3) * 2.0).amax() < 1e-6);
    }
}
