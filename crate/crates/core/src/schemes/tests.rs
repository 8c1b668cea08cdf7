use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Error;
use crate::lab::models::{random_spd, scheme_model};
use crate::matlib::{lambda_min, Mat, SpdMatrix};
use crate::riccati::{flow, DriftVariant, FilterModel};

fn ones(r: usize) -> Mat {
    Mat::from_element(r, r, 1.0)
}

// w^q_{q1,q2} by brute force over all (i, j, k)
fn brute_constants(s: &AssociationScheme) -> Vec<Vec<Vec<i64>>> {
    let r = s.points();
    let n1 = s.class_count() + 1;
    let mut w = vec![vec![vec![-1i64; n1]; n1]; n1];
    for i in 0..r {
        for j in 0..r {
            let q = s.class_of(i, j);
            for q1 in 0..n1 {
                for q2 in 0..n1 {
                    let count = (0..r)
                        .filter(|&k| s.class_of(i, k) == q1 && s.class_of(k, j) == q2)
                        .count() as i64;
                    assert!(w[q][q1][q2] < 0 || w[q][q1][q2] == count);
                    w[q][q1][q2] = count;
                }
            }
        }
    }
    w
}

fn assert_constants_match(s: &AssociationScheme) {
    let w = brute_constants(s);
    let n1 = s.class_count() + 1;
    for q in 0..n1 {
        for q1 in 0..n1 {
            for q2 in 0..n1 {
                assert_eq!(s.structural_constant(q, q1, q2), w[q][q1][q2]);
            }
        }
    }
}

fn coth_solution(q0: f64, t: f64) -> f64 {
    let c = 0.5 * ((q0 + 1.0) / (q0 - 1.0)).ln();
    1.0 / (t + c).tanh()
}

#[test]
fn trivial_scheme_constants() {
    for r in 2..7 {
        let s = AssociationScheme::trivial(r).unwrap();
        assert_eq!(s.class_count(), 1);
        assert_constants_match(&s);
        // complete graph: two vertices share r - 2 common neighbours
        assert_eq!(s.structural_constant(1, 1, 1), r as i64 - 2);
        assert_eq!(s.structural_constant(0, 1, 1), r as i64 - 1);
    }
}

#[test]
fn two_triangle_products() {
    let s = AssociationScheme::two_triangles();
    let b = s.adjacency();
    assert_eq!(&b[1] * &b[1], &b[0] * 2.0 + &b[1]);
    assert_eq!(&b[1] * &b[2], &b[2] * 2.0);
    assert_constants_match(&s);
}

#[test]
fn non_symmetric_partition_rejected() {
    let classes = vec![vec![0, 1, 2], vec![2, 0, 1], vec![1, 2, 0]];
    assert!(matches!(
        AssociationScheme::from_partition(classes),
        Err(Error::NotAScheme(_))
    ));
}

#[test]
fn distance_regular_graphs() {
    let k4 = ones(4) - Mat::identity(4, 4);
    let s = AssociationScheme::from_distance_regular_graph(&k4).unwrap();
    assert_eq!(s.class_count(), 1);
    assert_eq!(s.adjacency()[1], k4);

    let c6 = AssociationScheme::cycle(6).unwrap();
    assert_eq!(c6.class_count(), 3);
    assert_eq!(c6.valencies(), &[1, 2, 2, 1]);
    assert_constants_match(&c6);

    assert!(matches!(
        AssociationScheme::from_distance_regular_graph(&path_adjacency(4)),
        Err(Error::NotAScheme(_))
    ));
}

#[test]
fn trivial_idempotents() {
    let r = 5;
    let s = AssociationScheme::trivial(r).unwrap();
    let d = s.idempotent_basis();
    assert_eq!(d.len(), 2);
    let j = ones(r) / r as f64;
    assert!((&d[0] - &j).norm() < 1e-12);
    assert!((&d[1] - (Mat::identity(r, r) - &j)).norm() < 1e-12);
}

#[test]
fn idempotents_are_orthogonal_projectors() {
    for s in [
        AssociationScheme::two_triangles(),
        AssociationScheme::cycle(6).unwrap(),
        AssociationScheme::cycle(7).unwrap(),
        AssociationScheme::trivial(4).unwrap(),
    ] {
        let d = s.idempotent_basis();
        let r = s.points();
        let sum = d.iter().fold(Mat::zeros(r, r), |acc, x| acc + x);
        assert!((sum - Mat::identity(r, r)).norm() < 1e-10);
        for (i, di) in d.iter().enumerate() {
            for (j, dj) in d.iter().enumerate() {
                let want = if i == j { di.clone() } else { Mat::zeros(r, r) };
                assert!((di * dj - want).norm() < 1e-10);
            }
            let rank = crate::matlib::numerical_rank(di, 1e-9).0;
            assert!((di.trace() - rank as f64).abs() < 1e-9);
            for b in s.adjacency() {
                assert!((b * di - di * b).norm() < 1e-10);
            }
        }
    }
}

#[test]
fn projection_examples() {
    let s = AssociationScheme::cycle(6).unwrap();
    let id = Mat::identity(6, 6);
    assert!((project(&s, &id).unwrap() - &id).norm() == 0.0);
    let ring = recompose(&s, &[1.0, 0.3, 2.0, 0.7]).unwrap();
    assert!((project(&s, &ring).unwrap() - &ring).norm() < 1e-12);

    let mut off = id.clone();
    off[(0, 1)] = 1.0;
    off[(1, 0)] = 1.0;
    assert!(!membership(&s, &off, 1e-10));
    assert!(membership(&s, &ring, 1e-10));
    assert!(membership(&s, &project(&s, &off).unwrap(), 1e-10));
}

#[test]
fn decompose_examples() {
    let s = AssociationScheme::trivial(4).unwrap();
    let c = decompose(&s, &Mat::identity(4, 4)).unwrap();
    assert!(c.iter().all(|v| (v - 1.0).abs() < 1e-12));
    let c = decompose(&s, &ones(4)).unwrap();
    assert!((c[0] - 4.0).abs() < 1e-12 && c[1].abs() < 1e-12);

    let c6 = AssociationScheme::cycle(6).unwrap();
    let q = project(&c6, &random_spd(&mut ChaCha8Rng::seed_from_u64(3), 6, 0.1)).unwrap();
    let back = recompose(&c6, &decompose(&c6, &q).unwrap()).unwrap();
    assert!((back - &q).norm() < 1e-12);

    let mut off = Mat::identity(6, 6);
    off[(0, 1)] = 1.0;
    off[(1, 0)] = 1.0;
    assert!(matches!(decompose(&c6, &off), Err(Error::NotAMember { .. })));
}

#[test]
fn scalar_roots_solve_the_quadratic() {
    for &(a, r, s) in &[(0.0, 1.0, 1.0), (1.0, 1.0, 1.0), (-3.0, 0.2, 0.5), (2.0, 1e-8, 3.0)] {
        let (z1, z2) = scalar_roots(a, r, s);
        for z in [z1, z2] {
            assert!((s * z * z - 2.0 * a * z - r).abs() < 1e-12 * (1.0 + z * z));
        }
        assert!(z1 <= 0.0 && z2 >= 0.0);
    }
    assert_eq!(scalar_roots(0.0, 1.0, 1.0), (-1.0, 1.0));
    let (_, z2) = scalar_roots(1.0, 1.0, 1.0);
    assert!((z2 - (1.0 + 2f64.sqrt())).abs() < 1e-14);
}

#[test]
fn scalar_riccati_cases() {
    assert_eq!(scalar_riccati(0.0, 1.0, 1.0, 1.0, 3.0).unwrap(), 1.0);
    for t in [0.0, 0.5, 1.0, 5.0] {
        let v = scalar_riccati(0.0, 1.0, 1.0, 4.0, t).unwrap();
        assert!((v - coth_solution(4.0, t)).abs() < 1e-12);
    }
    // linear branch
    let v = scalar_riccati(-0.5, 2.0, 0.0, 1.0, 2.0).unwrap();
    let want = 1.0 * (-2.0f64).exp() + 2.0 * (1.0 - (-2.0f64).exp());
    assert!((v - want).abs() < 1e-12);
    assert!(scalar_riccati(0.0, -1.0, 1.0, 1.0, 1.0).is_err());
}

#[test]
fn scalar_closed_form_against_rk4() {
    let m = FilterModel::from_triplet(
        Mat::from_element(1, 1, 0.0),
        Mat::from_element(1, 1, 1.0),
        Mat::from_element(1, 1, 1.0),
    )
    .unwrap();
    let q0 = SpdMatrix::new(Mat::from_element(1, 1, 4.0)).unwrap();
    let traj = flow(&m, &DriftVariant::Nominal, &q0, 1.0, 1e-3, false).unwrap();
    let v = scalar_riccati(0.0, 1.0, 1.0, 4.0, 1.0).unwrap();
    assert!((traj.final_state()[(0, 0)] - v).abs() < 1e-8);
}

#[test]
fn trivial_scheme_constant_flow() {
    let s = AssociationScheme::trivial(4).unwrap();
    let id = Mat::identity(4, 4);
    let c = SchemeCoefficients::from_matrices(&s, &(&id * 0.0), &id, &id, &id).unwrap();
    let p = scheme_riccati_closed_form(&s, &c, 2.5).unwrap();
    assert!((p.as_mat() - &id).norm() < 1e-14);
}

#[test]
fn six_point_closed_form_matches_flow() {
    let s = AssociationScheme::two_triangles();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let model = scheme_model(&mut rng, &s, -1.0, 0.5).unwrap();
    let p0 = recompose(&s, &[0.8, 1.7, 0.4]).unwrap();
    let coeffs =
        SchemeCoefficients::from_matrices(&s, model.a(), model.r(), model.s(), &p0).unwrap();
    let q0 = SpdMatrix::new(p0).unwrap();
    let traj = flow(&model, &DriftVariant::Nominal, &q0, 5.0, 1e-3, false).unwrap();
    for k in (0..traj.len()).step_by(250) {
        let t = traj.times[k];
        let p = scheme_riccati_closed_form(&s, &coeffs, t).unwrap();
        let st = &traj.states[k];
        assert!((p.as_mat() - st).norm() <= 1e-6 * st.norm(), "t = {t}");
    }
}

#[test]
fn decay_rates_match_log_slope() {
    let s = AssociationScheme::cycle(6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let model = scheme_model(&mut rng, &s, -1.5, -1.0).unwrap();
    let p0 = recompose(&s, &[3.0, 2.5, 4.0, 2.0]).unwrap();
    let c = SchemeCoefficients::from_matrices(&s, model.a(), model.r(), model.s(), &p0).unwrap();
    let lim = c.limits();
    for (q, rate) in c.decay_rates().iter().enumerate() {
        let ts: Vec<f64> = (0..=40).map(|k| 0.5 + k as f64 * 0.05).collect();
        let ys: Vec<f64> = ts
            .iter()
            .map(|&t| (c.alpha(t).unwrap()[q] - lim[q]).abs().ln())
            .collect();
        let (slope, _, _) = crate::riccati::fit_line(&ts, &ys);
        assert!((-slope - rate).abs() <= 0.05 * rate, "q = {q}: {slope} vs {rate}");
    }
}

#[test]
fn block_ring_basics() {
    let ring = BlockRing::contiguous(&[2, 3]).unwrap();
    assert_eq!(ring.dim(), 5);
    assert_eq!(ring.block_count(), 2);
    assert_eq!(ring.max_block(), 3);
    let q = random_spd(&mut ChaCha8Rng::seed_from_u64(1), 5, 0.1);
    let p = ring.project(&q).unwrap();
    assert!(ring.membership(&p, 1e-14));
    assert!(!ring.membership(&q, 1e-14));
    assert_eq!(p[(0, 4)], 0.0);
    assert_eq!(p[(3, 4)], q[(3, 4)]);
    let blocks = ring.decompose(&p).unwrap();
    assert_eq!(blocks.len(), 2);
    assert!(BlockRing::contiguous(&[]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn projection_is_unital_psd_trace_preserving(seed in 0u64..10_000, which in 0usize..3) {
        let s = match which {
            0 => AssociationScheme::two_triangles(),
            1 => AssociationScheme::cycle(6).unwrap(),
            _ => AssociationScheme::cycle(5).unwrap(),
        };
        let r = s.points();
        let q = random_spd(&mut ChaCha8Rng::seed_from_u64(seed), r, 0.0);
        let p = project(&s, &q).unwrap();
        prop_assert!((p.trace() - q.trace()).abs() < 1e-12 * (1.0 + q.trace()));
        prop_assert!(lambda_min(&p) >= -1e-10 * (1.0 + q.norm()));
        let pi = project_idempotent(&s, &q).unwrap();
        prop_assert!((&pi - &p).norm() < 1e-10 * (1.0 + q.norm()));
        prop_assert!((project(&s, &p).unwrap() - &p).norm() < 1e-12 * (1.0 + p.norm()));
    }

    #[test]
    fn projection_pythagoras(seed in 0u64..10_000) {
        let s = AssociationScheme::cycle(6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = Mat::from_fn(6, 6, |_, _| rng.gen_range(-1.0..1.0));
        let q = (&q + q.transpose()) * 0.5;
        let b = recompose(&s, &[rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0),
                                rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).unwrap();
        let p = project(&s, &q).unwrap();
        let lhs = (&q - &b).norm_squared();
        let rhs = (&q - &p).norm_squared() + (&p - &b).norm_squared();
        prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs));
    }

    #[test]
    fn cycle_constants_are_integral(r in 3usize..10) {
        let s = AssociationScheme::cycle(r).unwrap();
        assert_constants_match(&s);
        prop_assert_eq!(s.class_count(), r / 2);
    }
}
