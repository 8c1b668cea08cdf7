use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Error;
use crate::lab::models::{random_model, random_spd, random_sym};
use crate::matlib::{loewner_margin, norm2, spectral_abscissa, Mat, SpdMatrix};
use crate::regmaps::RegMap;
use crate::schemes::AssociationScheme;
use std::sync::Arc;

fn m1(v: f64) -> Mat {
    Mat::from_element(1, 1, v)
}

fn scalar(a: f64, r: f64, s: f64) -> FilterModel {
    FilterModel::from_triplet(m1(a), m1(r), m1(s)).unwrap()
}

fn spd(m: Mat) -> SpdMatrix {
    SpdMatrix::new(m).unwrap()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// entrywise triple loops
fn naive_ricc(a: &Mat, r: &Mat, s: &Mat, q: &Mat) -> Mat {
    let n = q.nrows();
    let mut out = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut v = r[(i, j)];
            for k in 0..n {
                v += a[(i, k)] * q[(k, j)] + q[(i, k)] * a[(j, k)];
                for l in 0..n {
                    v -= q[(i, k)] * s[(k, l)] * q[(l, j)];
                }
            }
            out[(i, j)] = v;
        }
    }
    out
}

// a = 0, r = s = 1: q' = 1 - q^2, q(0) = q0 > 1 gives coth(t + acoth(q0))
fn coth_solution(q0: f64, t: f64) -> f64 {
    let c = 0.5 * ((q0 + 1.0) / (q0 - 1.0)).ln();
    1.0 / (t + c).tanh()
}

#[test]
fn ricc_scalar_fixed_point_and_zero() {
    let m = scalar(0.0, 1.0, 1.0);
    assert_eq!(ricc(&m1(1.0), &m).unwrap()[(0, 0)], 0.0);
    let mut g = rng(1);
    let model = random_model(&mut g, 3, -0.3).unwrap();
    let z = ricc(&Mat::zeros(3, 3), &model).unwrap();
    assert!((z - model.r().as_mat()).norm() < 1e-15);
}

#[test]
fn ricc_matches_naive_loops() {
    let mut g = rng(2);
    for _ in 0..5 {
        let model = random_model(&mut g, 3, -0.3).unwrap();
        let q = random_spd(&mut g, 3, 0.1);
        let want = naive_ricc(model.a(), model.r(), model.s(), &q);
        assert!((ricc(&q, &model).unwrap() - want).norm() < 1e-12);
    }
}

#[test]
fn ricc_pi_reductions() {
    let mut g = rng(3);
    let model = random_model(&mut g, 3, -0.3).unwrap();
    let q = random_spd(&mut g, 3, 0.1);
    let base = ricc(&q, &model).unwrap();
    assert!((ricc_pi(&q, &model, &RegMap::Identity).unwrap() - &base).norm() < 1e-13);

    let t = random_spd(&mut g, 3, 0.2);
    let eps = 0.15;
    let infl = RegMap::inflation(eps, t.clone()).unwrap();
    let want = &base + &t * model.s().as_mat() * &t * (eps * eps);
    assert!((ricc_pi(&q, &model, &infl).unwrap() - want).norm() < 1e-12);

    let scheme = Arc::new(AssociationScheme::cycle(3).unwrap());
    let ring = crate::schemes::recompose(&scheme, &[2.0, 0.5]).unwrap();
    let proj = RegMap::scheme(scheme);
    let rb = ricc(&ring, &model).unwrap();
    assert!((ricc_pi(&ring, &model, &proj).unwrap() - rb).norm() < 1e-12);
}

#[test]
fn repulsion_drift_values() {
    let m = scalar(0.0, 1.0, 1.0);
    assert!((ricc_repulsion(&m1(1.0), &m, 0.25, 0.25).unwrap()[(0, 0)] + 1.0).abs() < 1e-15);
    let mut g = rng(4);
    let model = random_model(&mut g, 3, -0.3).unwrap();
    let q = random_spd(&mut g, 3, 0.1);
    let plain = ricc(&q, &model).unwrap();
    assert!((ricc_repulsion(&q, &model, 0.0, 0.0).unwrap() - plain).norm() < 1e-14);
    for (e1, e2) in [(0.1, 0.05), (0.3, -0.2), (-0.1, 0.2)] {
        let closed = ricc_repulsion(&q, &model, e1, e2).unwrap();
        let expanded = ricc_repulsion_expanded(&q, &model, e1, e2).unwrap();
        assert!((closed - expanded).norm() < 1e-12);
    }
    assert!(ricc_repulsion(&q, &model, -0.3, -0.3).is_err());
}

#[test]
fn frechet_ricc_cases() {
    let mut g = rng(5);
    let model = random_model(&mut g, 3, -0.3).unwrap();
    let q = random_spd(&mut g, 3, 0.1);
    assert!(frechet_ricc(&q, &Mat::zeros(3, 3), &model).unwrap().norm() == 0.0);

    let a = model.a().clone();
    let lyap = FilterModel::new(
        a.clone(),
        model.r().as_mat().clone(),
        Mat::zeros(3, 3),
        Mat::identity(3, 3),
        crate::matlib::Vector::zeros(3),
        Mat::identity(3, 3),
    )
    .unwrap();
    let h = random_sym(&mut g, 3);
    let want = &a * &h + &h * a.transpose();
    assert!((frechet_ricc(&q, &h, &lyap).unwrap() - want).norm() < 1e-13);

    let step = 1e-5;
    let fd = (ricc(&(&q + &h * step), &model).unwrap() - ricc(&(&q - &h * step), &model).unwrap())
        / (2.0 * step);
    let d = frechet_ricc(&q, &h, &model).unwrap();
    assert!((d - fd).norm() < 1e-8);
}

#[test]
fn scalar_flow_closed_forms() {
    let m = scalar(0.0, 1.0, 1.0);
    let fixed = flow(&m, &DriftVariant::Nominal, &spd(m1(1.0)), 3.0, 1e-2, false).unwrap();
    assert!(fixed.states.iter().all(|s| (s[(0, 0)] - 1.0).abs() < 1e-14));

    let traj = flow(&m, &DriftVariant::Nominal, &spd(m1(4.0)), 5.0, 1e-3, false).unwrap();
    for (t, s) in traj.times.iter().zip(&traj.states) {
        assert!((s[(0, 0)] - coth_solution(4.0, *t)).abs() < 1e-8, "t = {t}");
    }
}

#[test]
fn flow_semigroup() {
    let mut g = rng(6);
    let model = random_model(&mut g, 3, -0.3).unwrap();
    let q0 = random_spd(&mut g, 3, 0.1);
    let h = 1e-3;
    let mid = flow_to(&model, &DriftVariant::Nominal, &q0, 1.0, h).unwrap();
    let two = flow_to(&model, &DriftVariant::Nominal, &mid, 1.5, h).unwrap();
    let one = flow_to(&model, &DriftVariant::Nominal, &q0, 2.5, h).unwrap();
    assert!((two - one).norm() < 1e-10);
}

#[test]
fn flow_rejects_bad_arguments() {
    let m = scalar(0.0, 1.0, 1.0);
    let q = spd(m1(1.0));
    assert!(flow(&m, &DriftVariant::Nominal, &q, 1.0, 0.0, false).is_err());
    assert!(flow(&m, &DriftVariant::Nominal, &q, -1.0, 0.1, false).is_err());
    assert!(matches!(
        flow(&m, &DriftVariant::Nominal, &SpdMatrix::identity(2), 1.0, 0.1, false),
        Err(Error::DimensionMismatch(_))
    ));
}

#[test]
fn frechet_flow_cases() {
    let mut g = rng(7);
    let model = random_model(&mut g, 3, -0.3).unwrap();
    let q = spd(random_spd(&mut g, 3, 0.2));
    let h = random_sym(&mut g, 3);
    let step = 1e-3;
    assert!((frechet_flow(&model, &q, &h, 0.0, step).unwrap() - &h).norm() < 1e-15);
    assert!(frechet_flow(&model, &q, &Mat::zeros(3, 3), 1.0, step).unwrap().norm() == 0.0);

    let t = 1.5;
    let d = 1e-4;
    let plus = flow_to(&model, &DriftVariant::Nominal, &(q.as_mat() + &h * d), t, step).unwrap();
    let minus = flow_to(&model, &DriftVariant::Nominal, &(q.as_mat() - &h * d), t, step).unwrap();
    let fd = (plus - minus) / (2.0 * d);
    let an = frechet_flow(&model, &q, &h, t, step).unwrap();
    assert!((&an - &fd).norm() <= 1e-5 * fd.norm());
}

#[test]
fn scalar_are_roots() {
    let p = are_solve(&scalar(0.0, 1.0, 1.0), &DriftVariant::Nominal, 1e-12).unwrap();
    assert!((p[(0, 0)] - 1.0).abs() < 1e-10);
    let p = are_solve(&scalar(1.0, 1.0, 1.0), &DriftVariant::Nominal, 1e-12).unwrap();
    assert!((p[(0, 0)] - (1.0 + 2f64.sqrt())).abs() < 1e-10);
}

#[test]
fn are_solution_is_fixed_and_stabilizing() {
    let mut g = rng(8);
    for shift in [-0.3, 1.0] {
        let model = random_model(&mut g, 3, shift).unwrap();
        let p = are_solve(&model, &DriftVariant::Nominal, 1e-12).unwrap();
        assert!(ricc(&p, &model).unwrap().norm() < 1e-9);
        let closed = model.a() - p.as_mat() * model.s().as_mat();
        assert!(spectral_abscissa(&closed) < 0.0);
        let after = flow_to(&model, &DriftVariant::Nominal, &p, 2.0, 1e-2).unwrap();
        assert!((after - p.as_mat()).norm() < 1e-8);
    }
}

#[test]
fn lyapunov_cases() {
    let id = Mat::identity(3, 3);
    let x = lyapunov_solve(&(-&id), &id).unwrap();
    assert!((x - &id * 0.5).norm() < 1e-14);
    assert!(lyapunov_solve(&(-&id), &Mat::zeros(3, 3)).unwrap().norm() == 0.0);

    let mut g = rng(9);
    let f = crate::rng::normal_matrix(&mut g, 4, 4) * 0.4 - Mat::identity(4, 4) * 1.5;
    assert!(spectral_abscissa(&f) < 0.0);
    let w = random_spd(&mut g, 4, 0.1);
    let x = lyapunov_solve(&f, &w).unwrap();
    assert!((f.transpose() * &x + &x * &f + &w).norm() < 1e-10);
}

#[test]
fn gramian_trivial_and_scalar() {
    let v = 1.3;
    let flat = Triplet::new(Mat::zeros(2, 2), Mat::identity(2, 2), Mat::identity(2, 2)).unwrap();
    let g = gramians(&flat, v, 1e-3).unwrap();
    assert!((g.c_v.as_mat() - Mat::identity(2, 2) * v).norm() < 1e-12);
    assert!((g.o_v.as_mat() - Mat::identity(2, 2) * v).norm() < 1e-12);

    let (a, r, s) = (-0.7, 1.4, 0.6);
    let t = Triplet::new(m1(a), m1(r), m1(s)).unwrap();
    let g = gramians(&t, v, 1e-3).unwrap();
    let c = r * ((2.0 * a * v).exp() - 1.0) / (2.0 * a);
    let o = s * (1.0 - (-2.0 * a * v).exp()) / (2.0 * a);
    assert!((g.c_v[(0, 0)] - c).abs() < 1e-8);
    assert!((g.o_v[(0, 0)] - o).abs() < 1e-8);
}

#[test]
fn steady_bounds_bracket() {
    let (lo, hi) = steady_bounds(&scalar(0.0, 1.0, 1.0), 4.0, 1e-3).unwrap();
    assert!(lo[(0, 0)] <= 1.0 && 1.0 <= hi[(0, 0)]);
    assert!(loewner_margin(&hi, &lo, 0.0).unwrap() >= 0.0);

    let mut g = rng(10);
    for _ in 0..3 {
        let model = random_model(&mut g, 3, -0.3).unwrap();
        let v = 1.0;
        let (lo, hi) = steady_bounds(&model, v, v / 2000.0).unwrap();
        assert!(loewner_margin(&hi, &lo, 1e-10).unwrap() >= 0.0);
        let q0 = random_spd(&mut g, 3, 0.05) * 3.0;
        let p = flow_to(&model, &DriftVariant::Nominal, &q0, 2.0 * v, 1e-3).unwrap();
        assert!(loewner_margin(&p, &lo, 0.0).unwrap() >= -1e-10);
        assert!(loewner_margin(&hi, &p, 0.0).unwrap() >= -1e-10);
    }
}

#[test]
fn rank_conditions() {
    let n = 3;
    let full = FilterModel::from_triplet(Mat::zeros(n, n), Mat::identity(n, n), Mat::identity(n, n))
        .unwrap();
    let rep = check_rank_conditions(&full, 1e-10);
    assert!(rep.controllable() && rep.observable());

    let blind = FilterModel::new(
        Mat::zeros(n, n),
        Mat::identity(n, n),
        Mat::zeros(1, n),
        Mat::identity(1, 1),
        crate::matlib::Vector::zeros(n),
        Mat::identity(n, n),
    )
    .unwrap();
    assert_eq!(check_rank_conditions(&blind, 1e-10).observability_rank, 0);

    // Jordan block: x1' = x2, x2' = x3; observing x1 sees everything
    let mut j = Mat::zeros(n, n);
    j[(0, 1)] = 1.0;
    j[(1, 2)] = 1.0;
    let mut c = Mat::zeros(1, n);
    c[(0, 0)] = 1.0;
    let chain = FilterModel::new(
        j,
        Mat::identity(n, n),
        c,
        Mat::identity(1, 1),
        crate::matlib::Vector::zeros(n),
        Mat::identity(n, n),
    )
    .unwrap();
    assert!(check_rank_conditions(&chain, 1e-10).observable());
}

#[test]
fn contraction_rate_cases() {
    let m = scalar(0.0, 1.0, 1.0);
    let q = spd(m1(2.0));
    assert!(matches!(
        estimate_contraction_rate(&m, &q, &q, 4.0, 1e-3, (0.0, 4.0)),
        Err(Error::DistanceUnderflow { .. })
    ));

    // closed-form gap between coth solutions decays like e^{-2t}
    let ts: Vec<f64> = (0..=200).map(|k| 2.0 + k as f64 * 0.02).collect();
    let gaps: Vec<f64> = ts
        .iter()
        .map(|&t| coth_solution(3.0, t) - coth_solution(1.5, t))
        .collect();
    let (slope, _, _) = fit_line(&ts, &gaps.iter().map(|g| g.ln()).collect::<Vec<_>>());
    let est = estimate_contraction_rate(&m, &spd(m1(3.0)), &spd(m1(1.5)), 6.0, 1e-3, (2.0, 6.0))
        .unwrap();
    assert!((est.slope - slope).abs() < 1e-3 * slope.abs());
    assert!((est.nu_hat - 1.0).abs() < 0.02);

    let mut d = Mat::zeros(2, 2);
    d[(0, 0)] = -1.0;
    d[(1, 1)] = -2.0;
    let diag = FilterModel::from_triplet(d, Mat::identity(2, 2), Mat::identity(2, 2)).unwrap();
    let est = estimate_contraction_rate(
        &diag,
        &SpdMatrix::identity(2),
        &spd(Mat::identity(2, 2) * 3.0),
        5.0,
        1e-3,
        (0.5, 5.0),
    )
    .unwrap();
    assert!(est.nu_hat > 0.0);
}

#[test]
fn inflation_flow_dominates_nominal() {
    let mut g = rng(11);
    let model = random_model(&mut g, 3, -0.3).unwrap();
    let q0 = spd(random_spd(&mut g, 3, 0.1));
    let map = RegMap::inflation(0.2, random_spd(&mut g, 3, 0.2)).unwrap();
    let pi = flow(&model, &DriftVariant::Perturbed(map), &q0, 3.0, 1e-3, false).unwrap();
    let nom = flow(&model, &DriftVariant::Nominal, &q0, 3.0, 1e-3, false).unwrap();
    for (a, b) in pi.states.iter().zip(&nom.states) {
        assert!(loewner_margin(a, b, 0.0).unwrap() >= -1e-10 * (1.0 + norm2(a)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn flow_states_stay_psd(seed in 0u64..10_000, shift in -1.0f64..0.5) {
        let mut g = rng(seed);
        let model = random_model(&mut g, 3, shift).unwrap();
        let q0 = spd(random_spd(&mut g, 3, 0.0));
        let traj = flow(&model, &DriftVariant::Nominal, &q0, 2.0, 2e-3, false).unwrap();
        prop_assert!(traj.psd_violations.is_empty());
    }

    #[test]
    fn ricc_is_symmetric(seed in 0u64..10_000) {
        let mut g = rng(seed);
        let model = random_model(&mut g, 4, -0.2).unwrap();
        let q = random_spd(&mut g, 4, 0.0);
        let d = ricc(&q, &model).unwrap();
        prop_assert!((&d - d.transpose()).norm() == 0.0);
    }

    #[test]
    fn flow_monotone_in_initial_condition(seed in 0u64..10_000) {
        let mut g = rng(seed);
        let model = random_model(&mut g, 3, -0.3).unwrap();
        let q1 = random_spd(&mut g, 3, 0.05);
        let q2 = &q1 + random_spd(&mut g, 3, 0.0);
        let p1 = flow_to(&model, &DriftVariant::Nominal, &q1, 1.0, 2e-3).unwrap();
        let p2 = flow_to(&model, &DriftVariant::Nominal, &q2, 1.0, 2e-3).unwrap();
        prop_assert!(loewner_margin(&p2, &p1, 0.0).unwrap() >= -1e-9 * (1.0 + norm2(&p2)));
    }
}
