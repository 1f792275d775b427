//! Seeded randomized checks of the identities and inequalities the solvers rely on.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bvp::{embed_state, max_embedding_check, sbp_defect, step_inequalities, BvpProblem};
use crate::homoclinic::{embedding_bound_check, HomoclinicProblem};
use crate::lattice::{Exponent, LatticeFunction};
use crate::nonlinearity::{Polynomial, PowerFamily, SharedNonlinearity};
use crate::solvers::Objective;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyResult {
    pub name: String,
    pub trials: usize,
    pub passed: usize,
    /// Largest observed defect or relative error, where meaningful.
    pub worst: f64,
    pub tolerance: f64,
}

impl PropertyResult {
    fn new(name: &str, tolerance: f64) -> Self {
        PropertyResult {
            name: name.into(),
            trials: 0,
            passed: 0,
            worst: 0.0,
            tolerance,
        }
    }

    fn record(&mut self, ok: bool, defect: f64) {
        self.trials += 1;
        self.passed += ok as usize;
        if defect.is_nan() || defect > self.worst {
            self.worst = defect;
        }
    }

    pub fn all_passed(&self) -> bool {
        self.trials > 0 && self.passed == self.trials
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub results: Vec<PropertyResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(PropertyResult::all_passed)
    }
}

fn exponent(v: f64) -> Exponent {
    Exponent::new(v).expect("sampled exponent exceeds 1")
}

fn random_nonlinearity(rng: &mut ChaCha8Rng) -> SharedNonlinearity {
    if rng.gen_bool(0.5) {
        let deg = rng.gen_range(1..=4);
        Arc::new(Polynomial::new(
            (0..deg).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        ))
    } else {
        let len = rng.gen_range(1..=3);
        let b = (0..len).map(|_| rng.gen_range(0.2..2.0)).collect();
        Arc::new(PowerFamily::new(b, exponent(rng.gen_range(1.5..5.0))).expect("positive weights"))
    }
}

/// Fourth-order central difference of `f` along coordinate `i`.
fn fd_partial(f: impl Fn(&[f64]) -> f64, x: &[f64], i: usize) -> f64 {
    let h = 1e-4 * x[i].abs().max(1.0);
    let mut y = x.to_vec();
    let mut at = |d: f64| {
        y[i] = x[i] + d;
        f(&y)
    };
    (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h)
}

fn gradient_trial<O: Objective>(obj: &O, x: &[f64], q: f64, result: &mut PropertyResult) {
    let mut g = vec![0.0; x.len()];
    obj.gradient(x, &mut g);
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        if q < 2.0 && x[i].abs() < 1e-9 {
            continue;
        }
        let fd = fd_partial(|y| obj.value(y), x, i);
        worst = worst.max((fd - g[i]).abs() / g[i].abs().max(1.0));
    }
    result.record(worst <= result.tolerance, worst);
}

/// Analytic gradients against central differences on random BVP and truncated
/// homoclinic instances.
pub fn gradient_suite(
    seed: u64,
    bvp_instances: usize,
    homoclinic_instances: usize,
) -> Vec<PropertyResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bvp = PropertyResult::new("bvp gradient vs finite differences", 1e-6);
    for _ in 0..bvp_instances {
        let t = rng.gen_range(1..=12);
        let q = rng.gen_range(1.2..4.0);
        let v = (0..t).map(|_| rng.gen_range(0.1..5.0)).collect();
        let nl = random_nonlinearity(&mut rng);
        let p = BvpProblem::new(
            t,
            exponent(q),
            rng.gen_range(0.0..5.0),
            v,
            nl,
            rng.gen_range(0.0..2.0),
        )
        .expect("valid random instance");
        let x: Vec<f64> = (0..t).map(|_| rng.gen_range(-1.5..1.5)).collect();
        gradient_trial(&p, &x, q, &mut bvp);
    }
    let mut home = PropertyResult::new("homoclinic gradient vs finite differences", 1e-6);
    for _ in 0..homoclinic_instances {
        let q: f64 = rng.gen_range(1.5..3.0);
        let p1: f64 = q + rng.gen_range(0.0..1.0);
        let p2 = q + rng.gen_range(0.0..1.0);
        let r = p1.max(p2) + rng.gen_range(0.5..2.0);
        let period = rng.gen_range(1..=3);
        let v = (0..period).map(|_| rng.gen_range(0.5..3.0)).collect();
        let b = (0..period).map(|_| rng.gen_range(0.5..2.0)).collect();
        let nl = Arc::new(PowerFamily::new(b, exponent(r)).expect("positive weights"));
        let p = HomoclinicProblem::new(
            exponent(p1),
            exponent(p2),
            exponent(q),
            rng.gen_range(0.1..3.0),
            v,
            nl,
            rng.gen_range(0.1..2.0),
            exponent(r),
            1.0,
        )
        .expect("valid random instance");
        let n_half = rng.gen_range(3..=10);
        let trunc = p.truncate(n_half);
        let x: Vec<f64> = (0..trunc.dim()).map(|_| rng.gen_range(-1.5..1.5)).collect();
        gradient_trial(&trunc, &x, q, &mut home);
    }
    vec![bvp, home]
}

/// Summation-by-parts defects for difference orders `1..=4` on random pairs.
pub fn sbp_suite(seed: u64, pairs: usize) -> PropertyResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut res = PropertyResult::new("summation by parts, orders 1..4", 1e-10);
    let zero: SharedNonlinearity = Arc::new(crate::nonlinearity::Zero);
    for trial in 0..pairs {
        let i = trial % 4 + 1;
        let t = rng.gen_range(1..=12);
        let q = exponent(rng.gen_range(1.2..4.0));
        let p = BvpProblem::higher_order(t, q, vec![1.0; 3], vec![1.0; t], zero.clone(), 0.0)
            .expect("valid order-4 problem");
        let u: Vec<f64> = (0..t).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..t).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (u, v) = (
            embed_state(&u, &p).expect("finite"),
            embed_state(&v, &p).expect("finite"),
        );
        let d = sbp_defect(&u, &v, q, i).unwrap_or(f64::INFINITY);
        res.record(d <= 1e-10, d);
    }
    res
}

/// `max|u| <= ρ‖u‖_X` and the two step inequalities over a grid of `(T, q, a, V₀)`.
pub fn embedding_suite(seed: u64, states: usize) -> Vec<PropertyResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut emb = PropertyResult::new("max |u| <= rho ||u||_X", 0.0);
    let mut step = PropertyResult::new("step inequalities", 0.0);
    let ts = [1usize, 2, 3, 5, 8, 12];
    let qs = [1.5, 2.0, 3.0, 4.0];
    let as_ = [0.0, 1.0, 10.0];
    let v0s = [0.1, 1.0, 5.0];
    let grid = ts.len() * qs.len() * as_.len() * v0s.len();
    let zero: SharedNonlinearity = Arc::new(crate::nonlinearity::Zero);
    for s in 0..states {
        let c = s % grid;
        let t = ts[c % ts.len()];
        let q = qs[(c / ts.len()) % qs.len()];
        let a = as_[(c / (ts.len() * qs.len())) % as_.len()];
        let v0 = v0s[c / (ts.len() * qs.len() * as_.len())];
        let v: Vec<f64> = (0..t)
            .map(|k| {
                if k == 0 {
                    v0
                } else {
                    v0 + rng.gen_range(0.0..3.0)
                }
            })
            .collect();
        let p =
            BvpProblem::new(t, exponent(q), a, v, zero.clone(), 0.0).expect("valid grid problem");
        let x: Vec<f64> = match s % 3 {
            0 => (0..t).map(|_| rng.gen_range(-10.0..10.0)).collect(),
            1 => {
                let j = rng.gen_range(0..t);
                (0..t)
                    .map(|k| {
                        if k == j {
                            rng.gen_range(-5.0..5.0)
                        } else {
                            0.0
                        }
                    })
                    .collect()
            }
            _ => vec![rng.gen_range(-3.0..3.0); t],
        };
        let u = embed_state(&x, &p).expect("finite");
        emb.record(max_embedding_check(&u, &p), 0.0);
        step.record(step_inequalities(&u).unwrap_or(false), 0.0);
    }
    vec![emb, step]
}

/// The homoclinic well-definedness bounds on random finitely supported states.
pub fn homoclinic_embedding_suite(seed: u64, states: usize) -> PropertyResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut res = PropertyResult::new("homoclinic embedding bounds", 0.0);
    for _ in 0..states {
        let len = rng.gen_range(1..=20);
        let u = LatticeFunction::new(
            rng.gen_range(-10..10),
            (0..len).map(|_| rng.gen_range(-5.0..5.0)).collect(),
        )
        .expect("finite");
        let p1 = exponent(rng.gen_range(1.1..4.0));
        let p2 = exponent(rng.gen_range(1.1..4.0));
        res.record(embedding_bound_check(&u, p1, p2), 0.0);
    }
    res
}

/// The full suite with the sizes used by the acceptance tests.
pub fn run_all(seed: u64) -> VerifyReport {
    let mut results = gradient_suite(seed, 100, 20);
    results.push(sbp_suite(seed.wrapping_add(1), 10_000));
    results.extend(embedding_suite(seed.wrapping_add(2), 10_000));
    results.push(homoclinic_embedding_suite(seed.wrapping_add(3), 1_000));
    VerifyReport { seed, results }
}
