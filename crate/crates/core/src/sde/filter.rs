use crate::error::{Error, Result};
use crate::matlib::{symmetrize, SpdMatrix, Vector};
use crate::regmaps::RegMap;
use crate::riccati::{flow, DriftVariant, FilterModel};

use super::paths::PathBundle;

/// PSD tolerance for filter covariances read off the Riccati flow.
const COV_TOL: f64 = 1e-8;

/// Conditional mean and covariance at one grid time.
#[derive(Debug, Clone)]
pub struct FilterState {
    pub t: f64,
    pub mean: Vector,
    pub cov: SpdMatrix,
}

/// Kalman-Bucy filter with gain `pi(P_t^pi) C' Sigma^{-1}`.
///
/// The covariance follows the perturbed Riccati flow of `map` (the nominal
/// flow for the identity). The mean takes Euler steps
/// `dX = A X dt + K_t (dY_t - C X dt)` on the path grid.
pub fn kalman_bucy_filter(
    model: &FilterModel,
    map: &RegMap,
    paths: &PathBundle,
    x0: &Vector,
    q0: &SpdMatrix,
) -> Result<Vec<FilterState>> {
    if x0.len() != model.dim() {
        return Err(Error::dims("x0 and model dimensions differ"));
    }
    let variant = match map {
        RegMap::Identity => DriftVariant::Nominal,
        other => DriftVariant::Perturbed(other.clone()),
    };
    let traj = flow(model, &variant, q0, paths.t_end(), paths.step(), false)?;
    if traj.times.len() != paths.times.len() {
        return Err(Error::dims("flow grid and path grid differ"));
    }
    let ct_sinv = model.c().transpose() * model.sigma_inv();
    let mut x = x0.clone();
    let mut out = Vec::with_capacity(paths.len());
    for (k, t) in paths.times.iter().enumerate() {
        let p = &traj.states[k];
        out.push(FilterState {
            t: *t,
            mean: x.clone(),
            cov: SpdMatrix::with_tolerance(symmetrize(p), COV_TOL)?,
        });
        if k + 1 < paths.len() {
            let h = paths.times[k + 1] - t;
            let gain = map.apply(p)? * &ct_sinv;
            let innov = &paths.increments[k] - model.c() * &x * h;
            x = &x + model.a() * &x * h + gain * innov;
        }
    }
    Ok(out)
}
