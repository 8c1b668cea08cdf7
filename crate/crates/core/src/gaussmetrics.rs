//! Distances between Gaussian laws and the analytic checks built on them.
//!
//! `w2_gaussian` and `kl_gaussian` are closed forms. The Monte Carlo
//! estimators are independent oracles for them, and
//! [`entropy_wasserstein_gap_report`] evaluates the entropy and transport
//! bounds between a perturbed and a nominal Kalman-Bucy filter along a run.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matlib::{
    eigh, inv_pd, norm2, spectral_map, sqrt_psd, symmetrize, Mat, SpdMatrix, Vector,
};
use crate::regmaps::RegMap;
use crate::riccati::{gramians, FilterModel};
use crate::rng::{self, Channel};
use crate::sde::{kalman_bucy_filter, PathBundle};

/// `N(mean, cov)`.
#[derive(Debug, Clone)]
pub struct GaussianLaw {
    pub mean: Vector,
    pub cov: SpdMatrix,
}

impl GaussianLaw {
    pub fn new(mean: Vector, cov: Mat) -> Result<Self> {
        let cov = SpdMatrix::new(cov)?;
        if cov.dim() != mean.len() {
            return Err(Error::dims(format!(
                "mean has {} entries, covariance is {1}x{1}",
                mean.len(),
                cov.dim()
            )));
        }
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

fn same_dim(g1: &GaussianLaw, g2: &GaussianLaw) -> Result<()> {
    if g1.dim() != g2.dim() {
        return Err(Error::dims(format!(
            "laws of dimension {} and {}",
            g1.dim(),
            g2.dim()
        )));
    }
    Ok(())
}

/// `tr(Q1 + Q2 - 2 (Q1^{1/2} Q2 Q1^{1/2})^{1/2})`, clipped at zero.
pub fn bures_sq(q1: &Mat, q2: &Mat) -> f64 {
    let r1 = sqrt_psd(q1);
    let inner = symmetrize(&(&r1 * q2 * &r1));
    (q1.trace() + q2.trace() - 2.0 * sqrt_psd(&inner).trace()).max(0.0)
}

/// Wasserstein-2 distance between Gaussian laws.
pub fn w2_gaussian(g1: &GaussianLaw, g2: &GaussianLaw) -> Result<f64> {
    same_dim(g1, g2)?;
    let dm = (&g1.mean - &g2.mean).norm_squared();
    Ok((dm + bures_sq(&g1.cov, &g2.cov)).sqrt())
}

/// Relative entropy `Ent(g1 | g2)`:
/// `1/2 [tr(Q2^{-1} Q1) - r - log det(Q2^{-1} Q1) + <dm, Q2^{-1} dm>]`.
///
/// The trace and log-determinant come from the eigenvalues of the congruence
/// `Q2^{-1/2} Q1 Q2^{-1/2}`.
pub fn kl_gaussian(g1: &GaussianLaw, g2: &GaussianLaw) -> Result<f64> {
    same_dim(g1, g2)?;
    let (vals, vecs) = eigh(&g2.cov);
    if vals[0] <= 0.0 {
        return Err(Error::NotPd { lambda_min: vals[0] });
    }
    let inv_root = spectral_map(&vals, &vecs, |x| 1.0 / x.sqrt());
    let (mu, _) = eigh(&symmetrize(&(&inv_root * g1.cov.as_mat() * &inv_root)));
    if mu[0] <= 0.0 {
        return Err(Error::NotPd { lambda_min: mu[0] });
    }
    let spectral: f64 = mu.iter().map(|m| m - 1.0 - m.ln()).sum();
    let dm = &g1.mean - &g2.mean;
    let w = &inv_root * &dm;
    Ok((0.5 * (spectral + w.norm_squared())).max(0.0))
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
}

fn gaussian_log_density(x: &Vector, mean: &Vector, inv: &Mat, logdet: f64) -> f64 {
    let d = x - mean;
    let n = x.len() as f64;
    -0.5 * ((&d.transpose() * inv * &d)[(0, 0)] + logdet + n * (2.0 * std::f64::consts::PI).ln())
}

fn logdet_pd(m: &Mat) -> Result<f64> {
    let (vals, _) = eigh(m);
    if vals[0] <= 0.0 {
        return Err(Error::NotPd { lambda_min: vals[0] });
    }
    Ok(vals.iter().map(|v| v.ln()).sum())
}

fn mc_mean<F>(samples: usize, seed: u64, f: F) -> Result<McEstimate>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> f64 + Sync,
{
    if samples < 2 {
        return Err(Error::Precondition("need at least two samples".into()));
    }
    const CHUNK: usize = 1024;
    let chunks = samples.div_ceil(CHUNK);
    let parts: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng::stream(seed, c as u64, 0, Channel::Sample);
            let n = CHUNK.min(samples - c * CHUNK);
            let mut s = 0.0;
            let mut s2 = 0.0;
            for _ in 0..n {
                let v = f(&mut rng);
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = parts
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let k = samples as f64;
    let mean = s / k;
    let var = ((s2 - k * mean * mean) / (k - 1.0)).max(0.0);
    Ok(McEstimate {
        value: mean,
        stderr: (var / k).sqrt(),
        samples,
    })
}

/// `E_{g1}[log g1(X) - log g2(X)]` by sampling `X ~ g1`.
pub fn kl_monte_carlo(g1: &GaussianLaw, g2: &GaussianLaw, samples: usize, seed: u64) -> Result<McEstimate> {
    same_dim(g1, g2)?;
    let n = g1.dim();
    let root = sqrt_psd(&g1.cov);
    let inv1 = inv_pd(&g1.cov)?;
    let inv2 = inv_pd(&g2.cov)?;
    let ld1 = logdet_pd(&g1.cov)?;
    let ld2 = logdet_pd(&g2.cov)?;
    mc_mean(samples, seed, |rng| {
        let x = &g1.mean + &root * rng::normal_vector(rng, n);
        gaussian_log_density(&x, &g1.mean, &inv1, ld1) - gaussian_log_density(&x, &g2.mean, &inv2, ld2)
    })
}

/// Squared W2 by sampling `X ~ g1` and pushing it through the optimal map
/// `T(x) = m2 + Q1^{-1/2} (Q1^{1/2} Q2 Q1^{1/2})^{1/2} Q1^{-1/2} (x - m1)`,
/// estimating `E|X - T(X)|^2`. Requires `Q1` positive definite.
pub fn w2_sq_monte_carlo(g1: &GaussianLaw, g2: &GaussianLaw, samples: usize, seed: u64) -> Result<McEstimate> {
    same_dim(g1, g2)?;
    let n = g1.dim();
    g1.cov.require_pd()?;
    let r1 = sqrt_psd(&g1.cov);
    let r1_inv = inv_pd(&r1)?;
    let mid = sqrt_psd(&symmetrize(&(&r1 * g2.cov.as_mat() * &r1)));
    let map = symmetrize(&(&r1_inv * mid * &r1_inv));
    mc_mean(samples, seed, |rng| {
        let z = &r1 * rng::normal_vector(rng, n);
        let x = &g1.mean + &z;
        let tx = &g2.mean + &map * &z;
        (x - tx).norm_squared()
    })
}

/// Both sides of `|log det(I - A)| <= 3/2 sqrt(r) |A|_2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogdetCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

/// Check the log-determinant bound for `|A|_2 < 1/(2 sqrt(r))`.
pub fn logdet_bound_check(a: &Mat) -> Result<LogdetCheck> {
    crate::matlib::check_square(a, "A")?;
    crate::matlib::check_finite(a, "A")?;
    let r = a.nrows();
    let na = norm2(a);
    let limit = 1.0 / (2.0 * (r as f64).sqrt());
    if na >= limit {
        return Err(Error::Precondition(format!(
            "|A|_2 = {na} must be below 1/(2 sqrt(r)) = {limit}"
        )));
    }
    let m = Mat::identity(r, r) - a;
    let det = m.clone().lu().determinant();
    if det <= 0.0 {
        return Err(Error::NonFinite("log det of I - A".into()));
    }
    let lhs = det.ln().abs();
    let rhs = 1.5 * (r as f64).sqrt() * na;
    Ok(LogdetCheck {
        lhs,
        rhs,
        ok: lhs <= rhs + 1e-12,
    })
}

/// One time point of [`entropy_wasserstein_gap_report`].
#[derive(Debug, Clone, Serialize)]
pub struct GapRow {
    pub t: f64,
    pub ent_lhs: f64,
    pub ent_rhs: f64,
    pub w2_lhs: f64,
    pub w2_rhs: f64,
    /// `rhs / lhs`; infinite when the left side vanishes.
    pub ent_ratio: f64,
    pub w2_ratio: f64,
}

/// Entropy and transport bounds along a run.
#[derive(Debug, Clone, Serialize)]
pub struct GapReport {
    pub v: f64,
    /// `lambda_max(O_v(C)) + 1/lambda_min(C_v)`.
    pub inverse_flow_bound: f64,
    /// `lambda_max(C_v(O)) + 1/lambda_min(O_v)`.
    pub flow_bound: f64,
    pub rows: Vec<GapRow>,
}

impl GapReport {
    pub fn min_ratio(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| [r.ent_ratio, r.w2_ratio])
            .fold(f64::INFINITY, f64::min)
    }
}

fn ratio(rhs: f64, lhs: f64) -> f64 {
    if lhs > 0.0 {
        rhs / lhs
    } else if rhs >= 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Runs the nominal and `map`-perturbed Kalman-Bucy filters on the same
/// observation path from `(x0, Q0)` and evaluates, at each `t >= v` of
/// `t_grid`, with `eta^pi` the perturbed and `eta` the nominal law:
///
/// - `Ent(eta^pi | eta) <= 1/2 c_o [|dm|^2 + 5/2 sqrt(r) |dQ|_2]`
/// - `W2^2 <= |dm|^2 + tr(dQ) + 4 r c_c c_o |dQ|_2`
///
/// where `c_o` is the inverse flow bound and `c_c` the flow bound of the
/// Gramians on `[0, v]`, and `dQ = phi^pi - phi`.
pub fn entropy_wasserstein_gap_report(
    model: &FilterModel,
    map: &RegMap,
    paths: &PathBundle,
    x0: &Vector,
    q0: &SpdMatrix,
    v: f64,
    t_grid: &[f64],
) -> Result<GapReport> {
    let step = paths.step();
    let g = gramians(&model.triplet(), v, step.min(v / 100.0))?;
    let c_o = g.inverse_flow_bound();
    let c_c = g.flow_bound();
    let nominal = kalman_bucy_filter(model, &RegMap::Identity, paths, x0, q0)?;
    let perturbed = kalman_bucy_filter(model, map, paths, x0, q0)?;
    let r = model.dim() as f64;
    let mut rows = Vec::new();
    for &t in t_grid {
        if t < v - 1e-12 {
            continue;
        }
        let k = paths.index_near(t);
        let (a, b) = (&perturbed[k], &nominal[k]);
        let eta_pi = GaussianLaw::new(a.mean.clone(), a.cov.as_mat().clone())?;
        let eta = GaussianLaw::new(b.mean.clone(), b.cov.as_mat().clone())?;
        let dm2 = (&a.mean - &b.mean).norm_squared();
        let dq = symmetrize(&(a.cov.as_mat() - b.cov.as_mat()));
        let dq2 = norm2(&dq);
        let ent_lhs = kl_gaussian(&eta_pi, &eta)?;
        let ent_rhs = 0.5 * c_o * (dm2 + 2.5 * r.sqrt() * dq2);
        let w2_lhs = w2_gaussian(&eta_pi, &eta)?.powi(2);
        let w2_rhs = dm2 + dq.trace() + 4.0 * r * c_c * c_o * dq2;
        rows.push(GapRow {
            t: paths.times[k],
            ent_lhs,
            ent_rhs,
            w2_lhs,
            w2_rhs,
            ent_ratio: ratio(ent_rhs, ent_lhs),
            w2_ratio: ratio(w2_rhs, w2_lhs),
        });
    }
    Ok(GapReport {
        v,
        inverse_flow_bound: c_o,
        flow_bound: c_c,
        rows,
    })
}
