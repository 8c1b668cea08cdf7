use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::regmaps::RegMap;
use crate::riccati::FilterModel;

use super::filter::kalman_bucy_filter;
use super::paths::simulate_replicate;

/// Replicate layout of a coupled Monte Carlo experiment.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MonteCarloParams {
    pub replicates: usize,
    pub t_end: f64,
    pub step: f64,
    pub seed: u64,
    /// Fraction of `[0, t_end]` discarded before steady moments are taken.
    pub burn_in: f64,
}

/// Moments of the gap between a perturbed and the nominal filter on shared
/// observation paths.
#[derive(Debug, Clone, Serialize)]
pub struct MomentReport {
    pub map: String,
    pub replicates: usize,
    pub seed: u64,
    /// `(E |psi^pi - psi|^2)^{1/2}`, pooled over replicates and steady times.
    pub gap_rms: f64,
    /// Same with the map's perturbation size halved.
    pub gap_rms_half: f64,
    /// `gap_rms / gap_rms_half`; absent when both vanish.
    pub ratio: Option<f64>,
    /// Standard error of the per-replicate ratios.
    pub ratio_stderr: Option<f64>,
    /// `sup_t E |psi^pi_t - X_t|^2` over the steady window.
    pub signal_mse_steady_sup: f64,
    /// `max_t E |psi^pi_t - X_t|^2` over the burn-in window.
    pub signal_mse_early_max: f64,
}

/// The same map with its distance to the identity halved.
pub fn halved_map(map: &RegMap) -> Result<RegMap> {
    Ok(match map {
        RegMap::Identity => RegMap::Identity,
        RegMap::Inflation { epsilon, t } => RegMap::Inflation {
            epsilon: epsilon / 2.0,
            t: t.clone(),
        },
        RegMap::SteinShrinkage { eps1, eps2, target } => RegMap::SteinShrinkage {
            eps1: eps1 / 2.0,
            eps2: *eps2,
            target: target.clone(),
        },
        other => {
            return Err(Error::Unsupported(format!(
                "{} maps have no perturbation size to halve",
                other.name()
            )))
        }
    })
}

struct ReplicateMoments {
    gap: f64,
    gap_half: f64,
    signal_err: Vec<f64>,
}

/// Runs the nominal filter, the `map` filter, and the half-size map filter on
/// each replicate's observation path from the model's initial law.
pub fn coupled_filter_comparison(
    model: &FilterModel,
    map: &RegMap,
    mc: &MonteCarloParams,
) -> Result<MomentReport> {
    if mc.replicates < 2 {
        return Err(Error::Precondition("need at least two replicates".into()));
    }
    if !(0.0..1.0).contains(&mc.burn_in) {
        return Err(Error::Precondition(format!(
            "burn-in fraction must lie in [0, 1), got {}",
            mc.burn_in
        )));
    }
    let half = halved_map(map)?;
    let x0 = model.x0_mean();
    let q0 = model.p0();
    let per: Vec<ReplicateMoments> = (0..mc.replicates)
        .into_par_iter()
        .map(|rep| -> Result<ReplicateMoments> {
            let paths = simulate_replicate(model, mc.t_end, mc.step, mc.seed, rep as u64)?;
            let psi = kalman_bucy_filter(model, &RegMap::Identity, &paths, x0, q0)?;
            let psi_pi = kalman_bucy_filter(model, map, &paths, x0, q0)?;
            let psi_half = kalman_bucy_filter(model, &half, &paths, x0, q0)?;
            let start = mc.burn_in * mc.t_end;
            let mut gap = 0.0;
            let mut gap_half = 0.0;
            let mut count = 0usize;
            for k in 0..paths.len() {
                if paths.times[k] >= start - 1e-12 {
                    gap += (&psi_pi[k].mean - &psi[k].mean).norm_squared();
                    gap_half += (&psi_half[k].mean - &psi[k].mean).norm_squared();
                    count += 1;
                }
            }
            let signal_err = (0..paths.len())
                .map(|k| (&psi_pi[k].mean - &paths.signal[k]).norm_squared())
                .collect();
            Ok(ReplicateMoments {
                gap: gap / count as f64,
                gap_half: gap_half / count as f64,
                signal_err,
            })
        })
        .collect::<Result<_>>()?;

    let reps = mc.replicates as f64;
    let gap_rms = (per.iter().map(|p| p.gap).sum::<f64>() / reps).sqrt();
    let gap_rms_half = (per.iter().map(|p| p.gap_half).sum::<f64>() / reps).sqrt();
    let (ratio, ratio_stderr) = if gap_rms_half > 0.0 {
        let rs: Vec<f64> = per
            .iter()
            .filter(|p| p.gap_half > 0.0)
            .map(|p| (p.gap / p.gap_half).sqrt())
            .collect();
        let k = rs.len() as f64;
        let m = rs.iter().sum::<f64>() / k;
        let var = rs.iter().map(|r| (r - m).powi(2)).sum::<f64>() / (k - 1.0).max(1.0);
        (Some(gap_rms / gap_rms_half), Some((var / k).sqrt()))
    } else {
        (None, None)
    };

    let steps = per[0].signal_err.len();
    let start = mc.burn_in * mc.t_end;
    let grid = crate::riccati::time_grid(mc.t_end, mc.step);
    let mut steady_sup = 0.0_f64;
    let mut early_max = 0.0_f64;
    for k in 0..steps {
        let m = per.iter().map(|p| p.signal_err[k]).sum::<f64>() / reps;
        if grid[k] >= start - 1e-12 {
            steady_sup = steady_sup.max(m);
        } else {
            early_max = early_max.max(m);
        }
    }
    Ok(MomentReport {
        map: map.name().to_string(),
        replicates: mc.replicates,
        seed: mc.seed,
        gap_rms,
        gap_rms_half,
        ratio,
        ratio_stderr,
        signal_mse_steady_sup: steady_sup,
        signal_mse_early_max: early_max,
    })
}
