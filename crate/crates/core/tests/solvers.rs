use std::sync::Arc;

use plap_core::bvp::{embed_state, residual_sup, BvpProblem};
use plap_core::lattice::Exponent;
use plap_core::nonlinearity::{CappedExponential, Polynomial, Zero};
use plap_core::solvers::{
    distinctness_report, find_three, minimize_local, mountain_pass, Kind, Objective, SolverConfig,
    Status,
};

fn q(v: f64) -> Exponent {
    Exponent::new(v).unwrap()
}

fn example2() -> BvpProblem {
    BvpProblem::new(
        8,
        q(3.0),
        10.0,
        (1..=8).map(|k| k as f64).collect(),
        Arc::new(CappedExponential::example2()),
        7e-4,
    )
    .unwrap()
}

/// T = 2, q = 3, a = 1, V = (1, 2), f(t) = 0.5 + 4t, λ = 1.
fn toy() -> BvpProblem {
    BvpProblem::new(
        2,
        q(3.0),
        1.0,
        vec![1.0, 2.0],
        Arc::new(Polynomial::new(vec![0.5, 4.0])),
        1.0,
    )
    .unwrap()
}

/// The three critical points of [`toy`], located by grid search and Newton refinement.
const TOY_CRITICAL: [[f64; 2]; 3] = [
    [1.02713, 0.97957],
    [-0.76084, -0.72317],
    [-0.21692, -0.10650],
];

#[test]
fn zero_lambda_converges_to_origin() {
    let p = BvpProblem::new(
        5,
        q(2.5),
        2.0,
        vec![1.0; 5],
        Arc::new(CappedExponential::example2()),
        0.0,
    )
    .unwrap();
    let cp = minimize_local(&p, &[3.0, -2.0, 1.0, 0.5, 4.0], &SolverConfig::default()).unwrap();
    // the minimum is degenerate for q > 2: |∇J| ~ |u|^{q-1}
    assert!(cp.u.sup_norm() < 1e-4);
    assert_eq!(cp.kind, Kind::LocalMin);
}

#[test]
fn toy_minimum_matches_grid_oracle() {
    let p = toy();
    let cp = minimize_local(&p, &[2.0, 2.0], &SolverConfig::default()).unwrap();
    let x = [cp.u.at(1), cp.u.at(2)];
    assert!((x[0] - TOY_CRITICAL[0][0]).abs() < 1e-2 && (x[1] - TOY_CRITICAL[0][1]).abs() < 1e-2);
    assert!(cp.residual_norm <= 1e-8);
}

#[test]
fn toy_saddle_from_mountain_pass() {
    let p = toy();
    let cfg = SolverConfig::default();
    let a = minimize_local(&p, &[2.0, 2.0], &cfg).unwrap();
    let b = minimize_local(&p, &[-0.8, -0.7], &cfg).unwrap();
    let xa = [a.u.at(1), a.u.at(2)];
    let xb = [b.u.at(1), b.u.at(2)];
    let mp = mountain_pass(&p, &xa, &xb, &cfg)
        .map_err(|e| format!("{e}"))
        .unwrap();
    let s = [mp.saddle.u.at(1), mp.saddle.u.at(2)];
    assert!((s[0] - TOY_CRITICAL[2][0]).abs() < 1e-2 && (s[1] - TOY_CRITICAL[2][1]).abs() < 1e-2);
    assert!(mp.saddle.energy >= a.energy.max(b.energy) - 1e-10);
}

#[test]
fn toy_find_three_recovers_the_critical_set() {
    let out = find_three(&toy(), 1.0, None, None, &SolverConfig::default()).unwrap();
    assert_eq!(out.status, Status::Success);
    assert_eq!(out.points.len(), 3);
    for c in TOY_CRITICAL {
        let nearest = out
            .points
            .iter()
            .map(|p| (p.u.at(1) - c[0]).abs().max((p.u.at(2) - c[1]).abs()))
            .fold(f64::INFINITY, f64::min);
        assert!(nearest < 1e-2);
    }
}

#[test]
fn zero_potential_gives_single_point() {
    let p = BvpProblem::new(4, q(3.0), 1.0, vec![1.0; 4], Arc::new(Zero), 0.0).unwrap();
    let cfg = SolverConfig {
        multistart_count: 8,
        ..Default::default()
    };
    let out = find_three(&p, 0.0, None, None, &cfg).unwrap();
    assert_eq!(out.status, Status::Partial);
    assert_eq!(out.points.len(), 1);
    assert!(out.points[0].u.sup_norm() < 1e-6);
}

#[test]
fn example2_three_solutions() {
    let p = example2();
    let cfg = SolverConfig::default();
    let out = find_three(&p, 7e-4, Some(14.0), Some((3.28e-4, 1.195e-3)), &cfg).unwrap();
    assert_eq!(out.status, Status::Success, "{:?}", out.warnings);
    assert!(out.points.len() >= 3);
    for cp in &out.points {
        let u = embed_state(&p.free_coordinates(&cp.u), &p).unwrap();
        assert!(residual_sup(&u, &p) <= 1e-8);
    }
    let lattices: Vec<_> = out.points.iter().map(|c| c.u.clone()).collect();
    assert!(distinctness_report(&lattices, 1e-4).flagged.is_empty());
    assert!(out.warnings.is_empty());
}

#[test]
fn find_three_is_deterministic() {
    let cfg = SolverConfig {
        multistart_count: 16,
        seed: 7,
        ..Default::default()
    };
    let a = find_three(&toy(), 1.0, None, None, &cfg).unwrap();
    let b = find_three(&toy(), 1.0, None, None, &cfg).unwrap();
    assert_eq!(a.points, b.points);
}

#[test]
fn lambda_outside_interval_warns() {
    let cfg = SolverConfig {
        multistart_count: 4,
        ..Default::default()
    };
    let out = find_three(&toy(), 1.0, None, Some((2.0, 3.0)), &cfg).unwrap();
    assert!(out.warnings.iter().any(|w| w.contains("outside")));
}
