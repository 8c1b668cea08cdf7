use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::lab::models::{random_model, random_spd};
use crate::matlib::{Mat, SpdMatrix, Vector};
use crate::regmaps::RegMap;
use crate::riccati::{are_solve, flow_to, DriftVariant, FilterModel};

fn m1(v: f64) -> Mat {
    Mat::from_element(1, 1, v)
}

fn v1(v: f64) -> Vector {
    Vector::from_element(1, v)
}

fn scalar_model(a: f64, r: f64, c: f64, sigma: f64, p0: f64) -> FilterModel {
    FilterModel::new(m1(a), m1(r), m1(c), m1(sigma), v1(0.0), m1(p0)).unwrap()
}

// predict/update recursion for x_{k+1} = (I + A h) x_k + w_k, dY_k = C x_k h + v_k
fn discrete_kalman(model: &FilterModel, paths: &PathBundle, x0: &Vector, p0: &Mat) -> Vec<Vector> {
    let n = model.dim();
    let c = model.c();
    let mut m = x0.clone();
    let mut p = p0.clone();
    let mut out = vec![m.clone()];
    for k in 0..paths.increments.len() {
        let h = paths.times[k + 1] - paths.times[k];
        let s = c * &p * c.transpose() * (h * h) + model.sigma().as_mat() * h;
        let gain = &p * c.transpose() * h * s.try_inverse().unwrap();
        m = &m + &gain * (&paths.increments[k] - c * &m * h);
        p = (Mat::identity(n, n) - &gain * c * h) * &p;
        let f = Mat::identity(n, n) + model.a() * h;
        m = &f * m;
        p = &f * &p * f.transpose() + model.r().as_mat() * h;
        out.push(m.clone());
    }
    out
}

fn two_pass_cov(xs: &[Vector]) -> Mat {
    let n = xs[0].len();
    let k = xs.len() as f64;
    let mean = xs.iter().fold(Vector::zeros(n), |acc, x| acc + x) / k;
    Mat::from_fn(n, n, |i, j| {
        xs.iter().map(|x| (x[i] - mean[i]) * (x[j] - mean[j])).sum::<f64>() / k
    })
}

#[test]
fn pure_noise_observations() {
    let sigma = 9.0;
    let model = scalar_model(-0.5, 1.0, 0.0, sigma, 1.0);
    let h = 0.01;
    let paths = simulate_signal_obs(&model, 100.0, h, 3).unwrap();
    let dy: Vec<f64> = paths.increments.iter().map(|d| d[0]).collect();
    let n = dy.len() as f64;
    let mean = dy.iter().sum::<f64>() / n;
    let var = dy.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let want = sigma * h;
    assert!((var - want).abs() <= 3.0 * want * (2.0 / n).sqrt(), "{var} vs {want}");
}

#[test]
fn brownian_signal_variance() {
    let p0 = 0.5;
    let model = scalar_model(0.0, 1.0, 1.0, 1.0, p0);
    let reps = 10_000;
    let t = 1.0;
    let finals: Vec<f64> = (0..reps)
        .map(|k| simulate_replicate(&model, t, 0.05, 17, k).unwrap().signal.last().unwrap()[0])
        .collect();
    let n = reps as f64;
    let mean = finals.iter().sum::<f64>() / n;
    let var = finals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let want = p0 + t;
    assert!(mean.abs() <= 3.0 * (want / n).sqrt());
    assert!((var - want).abs() <= 3.0 * want * (2.0 / n).sqrt());
}

#[test]
fn paths_are_deterministic() {
    let model = random_model(&mut ChaCha8Rng::seed_from_u64(1), 3, -0.3).unwrap();
    let a = simulate_signal_obs(&model, 1.0, 1e-2, 5).unwrap();
    let b = simulate_signal_obs(&model, 1.0, 1e-2, 5).unwrap();
    assert_eq!(a.signal, b.signal);
    assert_eq!(a.increments, b.increments);
    let c = simulate_signal_obs(&model, 1.0, 1e-2, 6).unwrap();
    assert_ne!(a.signal, c.signal);
    assert_eq!(a.len(), 101);
    assert_eq!(a.cumulative_observations().len(), a.len());
    assert!(a.to_csv().starts_with("t,x_1,x_2,x_3,y_1,y_2,y_3\n"));
}

#[test]
fn blind_filter_follows_prior() {
    let (a, r, p0) = (-0.4, 0.8, 2.0);
    let model = scalar_model(a, r, 0.0, 1.0, p0);
    let h = 1e-3;
    let paths = simulate_signal_obs(&model, 2.0, h, 9).unwrap();
    let states =
        kalman_bucy_filter(&model, &RegMap::Identity, &paths, &v1(1.5), model.p0()).unwrap();
    for (k, s) in states.iter().enumerate() {
        let euler = 1.5 * (1.0 + a * h).powi(k as i32);
        assert!((s.mean[0] - euler).abs() < 1e-12);
        let t = s.t;
        let lyap = (2.0 * a * t).exp() * p0 + r * ((2.0 * a * t).exp() - 1.0) / (2.0 * a);
        assert!((s.cov[(0, 0)] - lyap).abs() < 1e-10);
    }
}

#[test]
fn stationary_filter_covariance() {
    let model = random_model(&mut ChaCha8Rng::seed_from_u64(2), 3, -0.3).unwrap();
    let p = are_solve(&model, &DriftVariant::Nominal, 1e-12).unwrap();
    let paths = simulate_signal_obs(&model, 2.0, 1e-2, 4).unwrap();
    let x0 = Vector::from_vec(vec![3.0, -1.0, 0.5]);
    let states = kalman_bucy_filter(&model, &RegMap::Identity, &paths, &x0, &p).unwrap();
    for s in &states {
        assert!((s.cov.as_mat() - p.as_mat()).norm() < 1e-9);
    }
}

#[test]
fn filter_agrees_with_discrete_kalman() {
    let model = random_model(&mut ChaCha8Rng::seed_from_u64(3), 2, -0.3).unwrap();
    let mut errs = Vec::new();
    for h in [2e-3, 1e-3, 5e-4] {
        let paths = simulate_signal_obs(&model, 2.0, h, 21).unwrap();
        let kb = kalman_bucy_filter(&model, &RegMap::Identity, &paths, model.x0_mean(), model.p0())
            .unwrap();
        let dk = discrete_kalman(&model, &paths, model.x0_mean(), model.p0());
        let err = kb
            .iter()
            .zip(&dk)
            .map(|(s, m)| (&s.mean - m).amax())
            .fold(0.0, f64::max);
        errs.push(err);
    }
    for (e, h) in errs.iter().zip([2e-3, 1e-3, 5e-4]) {
        assert!(*e <= 10.0 * h, "error {e} at step {h}");
    }
    assert!(errs[1] < 0.7 * errs[0] && errs[2] < 0.7 * errs[1], "{errs:?}");
}

#[test]
fn sample_covariance_cases() {
    let x = Vector::from_vec(vec![1.0, 2.0, -1.0]);
    let same = vec![x.clone(); 4];
    assert_eq!(sample_covariance(&same).unwrap().as_mat().norm(), 0.0);
    let pair = vec![x.clone(), -x.clone()];
    let want = &x * x.transpose() * 2.0;
    assert!((sample_covariance_rescaled(&pair).unwrap().as_mat() - want).norm() < 1e-14);
    assert!(sample_covariance(&[x]).is_err());

    let mut g = ChaCha8Rng::seed_from_u64(4);
    let xs: Vec<Vector> = (0..50).map(|_| crate::rng::normal_vector(&mut g, 3)).collect();
    let naive = two_pass_cov(&xs);
    assert!((sample_covariance(&xs).unwrap().as_mat() - &naive).norm() < 1e-13);
    let scaled = sample_covariance_rescaled(&xs).unwrap();
    assert!((scaled.as_mat() - naive * (50.0 / 49.0)).norm() < 1e-13);
}

#[test]
fn enkf_small_ensemble_rank() {
    let model = random_model(&mut ChaCha8Rng::seed_from_u64(5), 3, -0.3).unwrap();
    let paths = simulate_signal_obs(&model, 0.1, 1e-2, 1).unwrap();
    let run = enkf(
        &model,
        &RegMap::Identity,
        2,
        &paths,
        model.x0_mean(),
        model.p0(),
        7,
        EnkfOptions::default(),
    )
    .unwrap();
    let first = run.rank_warnings.first().unwrap();
    assert_eq!(first.t, 0.0);
    assert!(first.rank <= 1);
    assert!(enkf(&model, &RegMap::Identity, 1, &paths, model.x0_mean(), model.p0(), 7, EnkfOptions::default()).is_err());
}

#[test]
fn enkf_is_deterministic() {
    let model = random_model(&mut ChaCha8Rng::seed_from_u64(6), 2, -0.3).unwrap();
    let paths = simulate_signal_obs(&model, 0.5, 1e-2, 1).unwrap();
    let run = |seed| {
        enkf(
            &model,
            &RegMap::inflation(0.1, Mat::identity(2, 2)).unwrap(),
            64,
            &paths,
            model.x0_mean(),
            model.p0(),
            seed,
            EnkfOptions { snapshot_every: Some(10) },
        )
        .unwrap()
    };
    let (a, b) = (run(3), run(3));
    assert_eq!(a.means, b.means);
    assert_eq!(a.covs, b.covs);
    assert_eq!(a.snapshots.len(), 6);
    assert_eq!(a.snapshots_csv(), b.snapshots_csv());
    assert_ne!(run(4).means, a.means);
}

#[test]
fn enkf_covariance_tracks_riccati() {
    let model = scalar_model(-0.5, 1.0, 1.0, 1.0, 2.0);
    let n = 4096;
    let (t, h) = (1.0, 1e-3);
    let paths = simulate_signal_obs(&model, t, h, 2).unwrap();
    let run = enkf(
        &model,
        &RegMap::Identity,
        n,
        &paths,
        model.x0_mean(),
        model.p0(),
        11,
        EnkfOptions::default(),
    )
    .unwrap();
    let phi = flow_to(&model, &DriftVariant::Nominal, model.p0(), t, h).unwrap()[(0, 0)];
    let p_t = run.final_cov()[(0, 0)];
    let se = phi * (2.0 / (n as f64 - 1.0)).sqrt();
    assert!((p_t - phi).abs() <= 5.0 * se, "{p_t} vs {phi}");
}

#[test]
fn coupled_comparison_cases() {
    let model = random_model(&mut ChaCha8Rng::seed_from_u64(7), 2, -0.5).unwrap();
    let mc = MonteCarloParams {
        replicates: 40,
        t_end: 6.0,
        step: 1e-2,
        seed: 3,
        burn_in: 0.3,
    };
    let id = coupled_filter_comparison(&model, &RegMap::Identity, &mc).unwrap();
    assert_eq!(id.gap_rms, 0.0);
    assert!(id.ratio.is_none());

    let infl = RegMap::inflation(0.2, Mat::identity(2, 2)).unwrap();
    let rep = coupled_filter_comparison(&model, &infl, &mc).unwrap();
    let (ratio, se) = (rep.ratio.unwrap(), rep.ratio_stderr.unwrap());
    assert!((ratio - 2.0).abs() <= 3.0 * se, "ratio {ratio} +- {se}");
    assert!(rep.signal_mse_steady_sup.is_finite());
    assert!(rep.signal_mse_steady_sup <= rep.signal_mse_early_max);

    assert!(halved_map(&RegMap::block_mask(&crate::lab::models::halves(2))).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn sample_covariance_matches_two_pass(seed in 0u64..10_000, n in 2usize..40) {
        let mut g = ChaCha8Rng::seed_from_u64(seed);
        let q = SpdMatrix::new(random_spd(&mut g, 3, 0.1)).unwrap();
        let root = crate::matlib::sqrt_spd(&q);
        let xs: Vec<Vector> = (0..n)
            .map(|_| root.as_mat() * crate::rng::normal_vector(&mut g, 3))
            .collect();
        let got = sample_covariance(&xs).unwrap();
        prop_assert!((got.as_mat() - two_pass_cov(&xs)).norm() < 1e-12);
    }

    #[test]
    fn filter_covariance_psd(seed in 0u64..10_000) {
        let model = random_model(&mut ChaCha8Rng::seed_from_u64(seed), 2, -0.2).unwrap();
        let paths = simulate_signal_obs(&model, 1.0, 1e-2, seed).unwrap();
        let map = RegMap::inflation(0.1, Mat::identity(2, 2)).unwrap();
        let states = kalman_bucy_filter(&model, &map, &paths, model.x0_mean(), model.p0()).unwrap();
        prop_assert_eq!(states.len(), paths.len());
        prop_assert!(states.iter().all(|s| s.cov.lambda_min() >= -1e-10));
    }
}
