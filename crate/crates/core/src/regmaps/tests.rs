use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::lab::models::{halves, random_model, random_spd};
use crate::matlib::{lambda_max, lambda_min, Mat, SpdMatrix};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// T(Q) entry by entry, with Q_P inverted directly
fn naive_nystrom(q: &Mat, p: &[usize]) -> Mat {
    let n = q.nrows();
    let pc: Vec<usize> = (0..n).filter(|i| !p.contains(i)).collect();
    let qp = Mat::from_fn(p.len(), p.len(), |a, b| q[(p[a], p[b])]);
    let inv = qp.try_inverse().unwrap();
    let mut out = q.clone();
    for &i in &pc {
        for &j in &pc {
            let mut v = 0.0;
            for (a, &k) in p.iter().enumerate() {
                for (b, &l) in p.iter().enumerate() {
                    v += q[(i, k)] * inv[(a, b)] * q[(l, j)];
                }
            }
            out[(i, j)] = v;
        }
    }
    out
}

fn all_maps(n: usize) -> Vec<RegMap> {
    let mut g = rng(99);
    vec![
        RegMap::Identity,
        RegMap::inflation(0.1, random_spd(&mut g, n, 0.1)).unwrap(),
        RegMap::block_mask(&halves(n)),
        RegMap::scheme(Arc::new(crate::schemes::AssociationScheme::cycle(n).unwrap())),
        RegMap::shrinkage(0.3, 0.1, TargetSpec::MaskBand { iota: 1 }).unwrap(),
        RegMap::shrinkage(
            0.3,
            0.1,
            TargetSpec::SchemeTarget(Arc::new(crate::schemes::AssociationScheme::cycle(n).unwrap())),
        )
        .unwrap(),
        RegMap::nystrom(Partition::new(vec![0, 1]).unwrap()),
    ]
}

#[test]
fn apply_fixed_points() {
    let q = random_spd(&mut rng(1), 4, 0.1);
    assert_eq!(RegMap::Identity.apply(&q).unwrap(), q);
    assert_eq!(RegMap::inflation(0.0, Mat::identity(4, 4)).unwrap().apply(&q).unwrap(), q);
    let ring = halves(4);
    let blocky = ring.project(&q).unwrap();
    assert_eq!(RegMap::block_mask(&ring).apply(&blocky).unwrap(), blocky);
}

// the tridiagonal all-ones mask is indefinite, so shrinking J toward it leaves the cone
#[test]
fn band_shrinkage_can_break_psd() {
    let j = Mat::from_element(3, 3, 1.0);
    let map = RegMap::shrinkage(0.3, 1.0, TargetSpec::MaskBand { iota: 2 }).unwrap();
    let p = map.apply(&j).unwrap();
    let want = 0.7 * (1.0 - 2f64.sqrt() / 2.0).powi(2) + 0.3 * (1.0 - 2f64.sqrt());
    let x = crate::matlib::Vector::from_vec(vec![0.5, -2f64.sqrt() / 2.0, 0.5]);
    let rayleigh = x.dot(&(&p * &x));
    assert!((rayleigh - want).abs() < 1e-12 && want < 0.0);
    assert!(lambda_min(&p) <= rayleigh);
}

#[test]
fn gamma_pi_closed_forms() {
    let mut g = rng(2);
    let model = random_model(&mut g, 4, -0.3).unwrap();
    let q = random_spd(&mut g, 4, 0.1);
    assert!(gamma_pi(&RegMap::Identity, &q, &model).unwrap().norm() == 0.0);

    let t = random_spd(&mut g, 4, 0.2);
    let eps = 0.2;
    let want = &t * model.s().as_mat() * &t * (eps * eps);
    let got = gamma_pi(&RegMap::inflation(eps, t).unwrap(), &q, &model).unwrap();
    assert!((got - want).norm() < 1e-12);

    // small eps2 keeps the indicator on
    let (e1, e2) = (0.4, 1e-3);
    let shrink = RegMap::shrinkage(e1, e2, TargetSpec::MaskBand { iota: 2 }).unwrap();
    let d = q.component_mul(&band_mask(4, 2)) - &q;
    let want = &d * model.s().as_mat() * &d * (e1 * e1);
    assert!((gamma_pi(&shrink, &q, &model).unwrap() - want).norm() < 1e-12);
}

#[test]
fn induced_triplets() {
    let mut g = rng(3);
    let model = random_model(&mut g, 3, -0.3).unwrap();
    let id = induced_triplet(&RegMap::Identity, &model).unwrap();
    assert_eq!(&id.a, model.a());
    assert_eq!(&id.r, model.r().as_mat());
    assert_eq!(&id.s, model.s().as_mat());

    let t = random_spd(&mut g, 3, 0.2);
    let tr = induced_triplet(&RegMap::inflation(0.3, t.clone()).unwrap(), &model).unwrap();
    let want = &t * model.s().as_mat() * &t * 0.09;
    assert!((&tr.r - model.r().as_mat() - want).norm() < 1e-12);

    let (e1, e2) = (0.2, 0.5);
    let shrink = RegMap::shrinkage(e1, e2, TargetSpec::MaskBand { iota: 1 }).unwrap();
    let tr = induced_triplet(&shrink, &model).unwrap();
    let want = Mat::identity(3, 3) * ((e1 / e2).powi(2) * lambda_max(model.s()));
    assert!((&tr.r - model.r().as_mat() - want).norm() < 1e-12);

    assert!(induced_triplet(&RegMap::block_mask(&halves(3)), &model).is_err());
}

#[test]
fn mask_deviation_examples() {
    let mut banded = Mat::identity(4, 4) * 2.0;
    banded[(0, 1)] = 0.5;
    banded[(1, 0)] = 0.5;
    assert_eq!(mask_deviation_bound(&banded, &TargetSpec::MaskBand { iota: 2 }).unwrap(), 0.0);

    let j = Mat::from_element(3, 3, 1.0);
    assert_eq!(mask_deviation_bound(&j, &TargetSpec::MaskBand { iota: 1 }).unwrap(), 2.0);

    let q = random_spd(&mut rng(4), 5, 0.1);
    let target = TargetSpec::SchemeTarget(Arc::new(crate::schemes::AssociationScheme::cycle(5).unwrap()));
    assert!((mask_deviation_bound(&q, &target).unwrap() - q.trace()).abs() < 1e-15);
    assert!(mask_deviation_bound(&q, &TargetSpec::MaskBand { iota: 0 }).is_err());
}

#[test]
fn nystrom_target_examples() {
    // rank-2 Q: the Schur complement of any two independent coordinates vanishes
    let v = Mat::from_row_slice(4, 2, &[1.0, 0.0, 0.3, 1.0, 2.0, -1.0, 0.5, 0.5]);
    let low = &v * v.transpose();
    let p = Partition::new(vec![0, 1]).unwrap();
    assert!((nystrom_target(&low, &p).unwrap() - &low).norm() < 1e-12);
    assert!((nystrom_bias(&low, &p, 7).unwrap() - &low).norm() < 1e-12);

    let mut bd = random_spd(&mut rng(5), 4, 0.2);
    for i in 0..2 {
        for j in 2..4 {
            bd[(i, j)] = 0.0;
            bd[(j, i)] = 0.0;
        }
    }
    let t = nystrom_target(&bd, &p).unwrap();
    assert!(t.view((2, 2), (2, 2)).norm() == 0.0);

    let mut g = rng(6);
    for _ in 0..5 {
        let q = random_spd(&mut g, 4, 0.1);
        let got = nystrom_target(&q, &p).unwrap();
        assert!((got - naive_nystrom(&q, &[0, 1])).norm() < 1e-12);
        let odd = Partition::new(vec![1, 3]).unwrap();
        let got = nystrom_target(&q, &odd).unwrap();
        assert!((got - naive_nystrom(&q, &[1, 3])).norm() < 1e-12);
    }
}

#[test]
fn nystrom_bias_limit_and_errors() {
    let q = random_spd(&mut rng(7), 4, 0.1);
    let p = Partition::new(vec![0, 1]).unwrap();
    let far = nystrom_bias(&q, &p, 1_000_000_000).unwrap();
    assert!((far - nystrom_target(&q, &p).unwrap()).norm() < 1e-8);
    assert!(nystrom_bias(&q, &p, 0).is_err());
    assert!(Partition::new(vec![0, 1, 2, 3]).unwrap().check_dim(4).is_err());
    assert!(Partition::from_one_based(&[0]).is_err());
    assert_eq!(Partition::from_one_based(&[3, 1]).unwrap().indices(), &[0, 2]);
}

#[test]
fn nystrom_bias_matches_monte_carlo() {
    let q = SpdMatrix::new(random_spd(&mut rng(8), 4, 0.2)).unwrap();
    let p = Partition::new(vec![0, 1]).unwrap();
    let mc = nystrom_monte_carlo(&q, &p, 16, 10_000, 8).unwrap();
    let want = nystrom_bias(&q, &p, 16).unwrap();
    let (mean, se) = (mc.mean_mat(), mc.stderr_mat());
    for i in 0..4 {
        for j in 0..4 {
            assert!((mean[(i, j)] - want[(i, j)]).abs() <= 4.0 * se[(i, j)] + 1e-12, "({i},{j})");
        }
    }
}

#[test]
fn h3_examples() {
    let block = RegMap::block_mask(&halves(4));
    let rep = check_h3(&block, 4, 50, 1).unwrap();
    assert!(rep.max_residual <= 1e-12 && rep.passed(1e-12));

    let six = RegMap::scheme(Arc::new(crate::schemes::AssociationScheme::two_triangles()));
    assert!(check_h3(&six, 6, 50, 2).unwrap().passed(1e-10));

    let rep = check_h3(&RegMap::Identity, 3, 20, 3).unwrap();
    assert_eq!(rep.max_residual, 0.0);

    assert!(check_h3(&RegMap::inflation(0.1, Mat::identity(3, 3)).unwrap(), 3, 5, 4).is_err());
}

#[test]
fn config_builds_maps() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("T.txt"), "2 2\n1 0\n0 2\n").unwrap();
    let cfg: RegMapConfig = toml::from_str("kind = \"inflation\"\nepsilon = 0.1\nT_file = \"T.txt\"").unwrap();
    match cfg.build(dir.path()).unwrap() {
        RegMap::Inflation { epsilon, t } => {
            assert_eq!(epsilon, 0.1);
            assert_eq!(t[(1, 1)], 2.0);
        }
        other => panic!("built {}", other.name()),
    }
    let cfg: RegMapConfig = toml::from_str("kind = \"mask\"\nblock_sizes = [2, 2]").unwrap();
    assert_eq!(cfg.build(dir.path()).unwrap().name(), RegMap::block_mask(&halves(4)).name());
    let cfg: RegMapConfig = toml::from_str("kind = \"inflation\"").unwrap();
    assert!(matches!(cfg.build(dir.path()), Err(crate::Error::Config(_))));
    let cfg: RegMapConfig = toml::from_str("kind = \"bogus\"").unwrap();
    assert!(cfg.build(dir.path()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn apply_preserves_psd(seed in 0u64..10_000) {
        let n = 5;
        let q = random_spd(&mut rng(seed), n, 0.0);
        for map in all_maps(n) {
            let p = map.apply(&q).unwrap();
            prop_assert!(lambda_min(&p) >= -1e-10 * (1.0 + lambda_max(&p)), "{}", map.name());
        }
    }

    #[test]
    fn idempotent_maps_are_idempotent(seed in 0u64..10_000) {
        let n = 5;
        let q = random_spd(&mut rng(seed), n, 0.0);
        for map in all_maps(n).into_iter().filter(|m| m.is_idempotent()) {
            let p = map.apply(&q).unwrap();
            let pp = map.apply(&p).unwrap();
            prop_assert!((&pp - &p).norm() < 1e-9 * (1.0 + p.norm()), "{}", map.name());
        }
    }
}
