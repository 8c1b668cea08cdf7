use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matlib::{numerical_rank, sqrt_psd, symmetrize, Mat, SpdMatrix, Vector};
use crate::regmaps::RegMap;
use crate::riccati::FilterModel;
use crate::rng::{self, Channel};

use super::paths::PathBundle;

/// Relative singular-value cutoff for the ensemble rank check.
const RANK_TOL: f64 = 1e-10;
const COV_TOL: f64 = 1e-8;

/// Particle positions at one grid time.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    pub t: f64,
    pub particles: Vec<Vector>,
    /// `p_t = (1 - 1/N)^{-1} P_{eta^N}`.
    pub sample_cov_rescaled: SpdMatrix,
    /// Particle `i` draws from the streams keyed by `(seed, replicate, i)`.
    pub seed: u64,
    pub replicate: u64,
}

impl ParticleEnsemble {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }
}

/// Rank deficiency of the ensemble covariance, reported rather than fatal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankWarning {
    pub t: f64,
    pub rank: usize,
    pub dim: usize,
    pub particles: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct EnkfOptions {
    /// Keep a full snapshot every this many steps; the first and last grid
    /// points are always kept.
    pub snapshot_every: Option<usize>,
}

impl Default for EnkfOptions {
    fn default() -> Self {
        Self {
            snapshot_every: None,
        }
    }
}

/// Ensemble means and rescaled covariances on the whole grid plus snapshots.
#[derive(Debug, Clone)]
pub struct EnkfRun {
    pub times: Vec<f64>,
    pub means: Vec<Vector>,
    pub covs: Vec<Mat>,
    pub snapshots: Vec<ParticleEnsemble>,
    pub rank_warnings: Vec<RankWarning>,
}

impl EnkfRun {
    pub fn final_cov(&self) -> &Mat {
        self.covs.last().expect("non-empty run")
    }

    pub fn final_mean(&self) -> &Vector {
        self.means.last().expect("non-empty run")
    }

    /// CSV with header `t,particle,x_1..x_r` over all snapshots.
    pub fn snapshots_csv(&self) -> String {
        let n = self.means.first().map_or(0, |v| v.len());
        let mut out = String::from("t,particle");
        for i in 1..=n {
            out.push_str(&format!(",x_{i}"));
        }
        out.push('\n');
        for s in &self.snapshots {
            for (i, x) in s.particles.iter().enumerate() {
                out.push_str(&format!("{:.10e},{i}", s.t));
                for v in x.iter() {
                    out.push_str(&format!(",{v:.10e}"));
                }
                out.push('\n');
            }
        }
        out
    }
}

fn mean_of(particles: &[Vector]) -> Result<Vector> {
    let first = particles
        .first()
        .ok_or_else(|| Error::Precondition("empty ensemble".into()))?;
    let mut m = Vector::zeros(first.len());
    for x in particles {
        m += x;
    }
    Ok(m / particles.len() as f64)
}

fn scatter(particles: &[Vector], mean: &Vector) -> Mat {
    let n = mean.len();
    let mut s = Mat::zeros(n, n);
    for x in particles {
        let d = x - mean;
        s += &d * d.transpose();
    }
    symmetrize(&s)
}

/// Empirical covariance about the empirical mean, `P_{eta^N}`.
pub fn sample_covariance(particles: &[Vector]) -> Result<SpdMatrix> {
    if particles.len() < 2 {
        return Err(Error::Precondition("sample covariance needs N >= 2".into()));
    }
    let m = mean_of(particles)?;
    SpdMatrix::with_tolerance(scatter(particles, &m) / particles.len() as f64, COV_TOL)
}

/// `(1 - 1/N)^{-1} P_{eta^N}`.
pub fn sample_covariance_rescaled(particles: &[Vector]) -> Result<SpdMatrix> {
    if particles.len() < 2 {
        return Err(Error::Precondition("sample covariance needs N >= 2".into()));
    }
    let m = mean_of(particles)?;
    SpdMatrix::with_tolerance(
        scatter(particles, &m) / (particles.len() - 1) as f64,
        COV_TOL,
    )
}

struct Particle {
    x: Vector,
    signal: ChaCha8Rng,
    obs: ChaCha8Rng,
}

/// Regularized ensemble Kalman-Bucy filter driven by the observation
/// increments of `paths`.
///
/// Each step updates every particle by
/// `xi += A xi h + R^{1/2} dW^i + K (dY - C xi h - Sigma^{1/2} dV^i)` with
/// `K = pi(p_t) C' Sigma^{-1}` refreshed from the current ensemble. Particles
/// start i.i.d. `N(x0, Q0)`.
pub fn enkf(
    model: &FilterModel,
    map: &RegMap,
    n_particles: usize,
    paths: &PathBundle,
    x0: &Vector,
    q0: &SpdMatrix,
    seed: u64,
    opts: EnkfOptions,
) -> Result<EnkfRun> {
    if n_particles < 2 {
        return Err(Error::Precondition("EnKF needs N >= 2".into()));
    }
    let dim = model.dim();
    if x0.len() != dim || q0.dim() != dim {
        return Err(Error::dims("initial law and model dimensions differ"));
    }
    map.check_dim(dim)?;
    let rep = paths.replicate;
    let q0_root = sqrt_psd(q0);
    let mut ens: Vec<Particle> = (0..n_particles)
        .map(|i| {
            let mut init = rng::stream(seed, rep, i as u64, Channel::Initial);
            Particle {
                x: x0 + &q0_root * rng::normal_vector(&mut init, dim),
                signal: rng::stream(seed, rep, i as u64, Channel::SignalNoise),
                obs: rng::stream(seed, rep, i as u64, Channel::ObservationNoise),
            }
        })
        .collect();

    let ct_sinv = model.c().transpose() * model.sigma_inv();
    let m_obs = model.obs_dim();
    let k_steps = paths.len();
    let mut run = EnkfRun {
        times: paths.times.clone(),
        means: Vec::with_capacity(k_steps),
        covs: Vec::with_capacity(k_steps),
        snapshots: Vec::new(),
        rank_warnings: Vec::new(),
    };
    for k in 0..k_steps {
        let t = paths.times[k];
        let xs: Vec<Vector> = ens.iter().map(|p| p.x.clone()).collect();
        let mean = mean_of(&xs)?;
        let p = sample_covariance_rescaled(&xs)?;
        if k == 0 || n_particles <= dim {
            let (rank, _) = numerical_rank(&p, RANK_TOL);
            if rank < dim {
                run.rank_warnings.push(RankWarning {
                    t,
                    rank,
                    dim,
                    particles: n_particles,
                });
            }
        }
        let keep = k == 0
            || k + 1 == k_steps
            || opts.snapshot_every.is_some_and(|e| e > 0 && k % e == 0);
        if keep {
            run.snapshots.push(ParticleEnsemble {
                t,
                particles: xs,
                sample_cov_rescaled: p.clone(),
                seed,
                replicate: rep,
            });
        }
        run.means.push(mean);
        if k + 1 == k_steps {
            run.covs.push(p.into_inner());
            break;
        }
        let h = paths.times[k + 1] - t;
        let sh = h.sqrt();
        let gain = map.apply(&p)? * &ct_sinv;
        run.covs.push(p.into_inner());
        let dy = &paths.increments[k];
        ens.par_iter_mut().for_each(|pt| {
            let dw = rng::normal_vector(&mut pt.signal, dim) * sh;
            let dv = rng::normal_vector(&mut pt.obs, m_obs) * sh;
            let innov = dy - model.c() * &pt.x * h - model.sigma_sqrt() * dv;
            pt.x = &pt.x + model.a() * &pt.x * h + model.r_sqrt() * dw + &gain * innov;
        });
    }
    Ok(run)
}
