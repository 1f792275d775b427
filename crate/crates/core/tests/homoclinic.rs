use std::sync::Arc;

use plap_core::bvp::{embed_state, grad_j1, BvpProblem};
use plap_core::certifier::{
    periodicity_check, ps_lower_bound_check, rabinowitz_check, smallness_check, SampleBox,
};
use plap_core::homoclinic::{
    embedding_bound_check, grad_home, j_home, solve_homoclinic, translate, translate_within,
    HomoclinicOptions, HomoclinicProblem,
};
use plap_core::lattice::{weighted_q_norm, Exponent, LatticeFunction};
use plap_core::nonlinearity::{Nonlinearity, Polynomial, PowerFamily};
use plap_core::solvers::{Objective, SolverConfig, Status};
use proptest::prelude::*;

fn e(v: f64) -> Exponent {
    Exponent::new(v).unwrap()
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

fn interior_state(n_half: usize, support: i64, seed: &[f64]) -> LatticeFunction {
    let w = n_half as i64 + 2;
    LatticeFunction::from_fn(-w, w, |k| {
        if k.abs() <= support {
            seed[(k + support) as usize % seed.len()]
        } else {
            0.0
        }
    })
    .unwrap()
}

#[test]
fn example1_hypotheses() {
    let p = example1();
    let nl = p.nonlinearity().as_ref();
    assert!(rabinowitz_check(nl, 4.0, 1.0, SampleBox::around(10.0), 0..=1).holds);
    assert!(smallness_check(nl, 2.0, 0..=1).holds);
    let v = p.v_table().to_vec();
    assert!(periodicity_check(nl, move |k| v[k.rem_euclid(2) as usize], 2, 1000, 3).holds);
}

#[test]
fn example1_schedule() {
    let p = example1();
    let out = solve_homoclinic(
        &p,
        &[32, 64, 128],
        &SolverConfig::default(),
        &HomoclinicOptions::default(),
    )
    .unwrap();
    assert_eq!(out.status, Status::Success);
    for lvl in &out.levels {
        let r = &lvl.report;
        assert!(r.accepted, "{r:?}");
        assert!(r.residual_norm <= 1e-8);
        assert!(r.tail_max <= 1e-6);
        assert!(r.mp_level > 0.0);
        assert!(r.sup_norm >= 1e-3);
    }
    let last = out.levels.last().unwrap();
    let cp = last.point.as_ref().unwrap();
    let t = p.truncate(128);
    // translation by one period keeps J and the weighted norm
    let moved = translate_within(&cp.u, 2, &p, 1e-30).unwrap();
    assert!(moved.sup_distance(&cp.u) > 0.1);
    let (j0, j1) = (j_home(&cp.u, &p).unwrap(), j_home(&moved, &p).unwrap());
    assert!((j0 - j1).abs() <= 1e-10);
    // the coercivity inequality along the iterates
    assert!(last.trace.len() >= 100);
    for u in last.trace.iter().take(100) {
        let x = t.free_of(u).unwrap();
        assert!(ps_lower_bound_check(&t, &x, 4.0).holds);
    }
    let d = &out.successive_differences;
    assert_eq!(d.len(), 2);
    assert!(d[1] <= d[0] + 1e-12, "{d:?}");
}

#[test]
fn lambda_zero_fails_at_endpoint() {
    let p = example1().with_lambda(0.0).unwrap();
    let cfg = SolverConfig::default();
    let out = solve_homoclinic(&p, &[16], &cfg, &HomoclinicOptions::default()).unwrap();
    assert_eq!(out.status, Status::Partial);
    assert!(out.levels[0]
        .report
        .failure
        .as_deref()
        .unwrap()
        .contains("negative-energy"));
}

#[test]
fn agrees_with_bvp_gradient() {
    // p1 = p2 = q, constant V and k-independent f: the truncation is the BVP on 2N+1 sites
    let q = 2.5;
    let nl = Arc::new(Polynomial::new(vec![0.0, 0.3, 0.0, 1.0]));
    let hp = HomoclinicProblem::new(
        e(q),
        e(q),
        e(q),
        1.5,
        vec![2.0],
        nl.clone(),
        0.7,
        e(4.5),
        1.0,
    )
    .unwrap();
    let n_half = 6;
    let dim = 2 * n_half + 1;
    let bp = BvpProblem::new(dim, e(q), 1.5, vec![2.0; dim], nl, 0.7).unwrap();
    let free: Vec<f64> = (0..dim).map(|i| (1.3 * i as f64).cos() * 1.7).collect();
    let g_bvp = grad_j1(&embed_state(&free, &bp).unwrap(), &bp);
    let u = hp.truncate(n_half).to_lattice(&free);
    let g_home = grad_home(&u, &hp).unwrap();
    for (i, gb) in g_bvp.iter().enumerate() {
        assert!((gb - g_home.values()[i]).abs() <= 1e-12 * gb.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradient_matches_finite_differences(seed in prop::collection::vec(-2.0f64..2.0, 5..15), p2 in 2.0f64..3.5) {
        let nl = PowerFamily::new(vec![1.0, 1.5], e(4.0)).unwrap();
        let p = HomoclinicProblem::new(e(2.0), e(p2), e(2.0), 0.8, vec![1.0, 2.0], Arc::new(nl), 0.9, e(4.0), 1.0).unwrap();
        let t = p.truncate(10);
        let x = t.free_of(&interior_state(10, 6, &seed)).unwrap();
        let mut g = vec![0.0; x.len()];
        Objective::gradient(&t, &x, &mut g);
        for i in 0..x.len() {
            let h = 1e-5 * x[i].abs().max(1.0);
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[i] += h;
            xm[i] -= h;
            let fd = (t.value(&xp) - t.value(&xm)) / (2.0 * h);
            prop_assert!((fd - g[i]).abs() <= 1e-6 * g[i].abs().max(1.0));
        }
    }

    #[test]
    fn translation_invariance(seed in prop::collection::vec(-3.0f64..3.0, 3..9)) {
        let p = example1();
        let u = interior_state(20, 5, &seed);
        let moved = translate(&u, 4, &p).unwrap();
        let w = |k: i64| p.v(k) / 2.0;
        let n0 = weighted_q_norm(&u, e(2.0), w).unwrap();
        let n1 = weighted_q_norm(&moved, e(2.0), w).unwrap();
        prop_assert!((n0 - n1).abs() <= 1e-12 * n0.max(1.0));
        let (j0, j1) = (j_home(&u, &p).unwrap(), j_home(&moved, &p).unwrap());
        prop_assert!((j0 - j1).abs() <= 1e-10 * j0.abs().max(1.0));
    }

    #[test]
    fn embedding_bounds_hold(seed in prop::collection::vec(-5.0f64..5.0, 1..20), p1 in 1.1f64..4.0, p2 in 1.1f64..4.0) {
        let u = LatticeFunction::new(0, seed).unwrap();
        prop_assert!(embedding_bound_check(&u, e(p1), e(p2)));
    }

    #[test]
    fn coercivity_for_example1(seed in prop::collection::vec(-3.0f64..3.0, 3..12)) {
        let p = example1();
        let t = p.truncate(12);
        let x = t.free_of(&interior_state(12, 8, &seed)).unwrap();
        prop_assert!(ps_lower_bound_check(&t, &x, 4.0).holds);
    }
}

#[test]
fn nonlinearity_is_periodic_with_v() {
    let nl = PowerFamily::new(vec![1.0, 1.0], e(4.0)).unwrap();
    assert_eq!(nl.f(3, 0.5), nl.f(1, 0.5));
}
