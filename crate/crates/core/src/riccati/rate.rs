use serde::Serialize;

use crate::error::{Error, Result};
use crate::matlib::{norm2, Mat, SpdMatrix};

use super::drift::DriftVariant;
use super::flow::flow;
use super::model::FilterModel;

/// Fraction of the fit window discarded as burn-in.
pub const BURN_IN: f64 = 0.2;
/// Distances below this multiple of `1 + |phi_t(Q1)|_2` count as merged.
pub const MERGE_TOL: f64 = 1e-12;

/// Fitted exponential contraction rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateEstimate {
    /// `-slope / 2` of the least-squares line through `log |gap|_2`.
    pub nu_hat: f64,
    pub slope: f64,
    /// Time range actually used by the fit.
    pub window: (f64, f64),
    /// RMS of the fit residuals.
    pub residual: f64,
    /// First time the flows merged numerically inside the window, if any.
    pub merged_at: Option<f64>,
}

/// Least-squares line through `(t, y)`; returns `(slope, intercept, rms)`.
pub fn fit_line(ts: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = ts.len() as f64;
    let mt = ts.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = ts.iter().map(|t| (t - mt).powi(2)).sum();
    let sxy: f64 = ts.iter().zip(ys).map(|(t, y)| (t - mt) * (y - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mt;
    let rms = (ts
        .iter()
        .zip(ys)
        .map(|(t, y)| (y - icpt - slope * t).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (slope, icpt, rms)
}

/// Fit `log |gaps|_2` against `times` over `window` after burn-in.
///
/// Points after the gap falls under the merge floor are dropped and the
/// merge time reported; fewer than three usable points is an error.
pub fn fit_decay(
    times: &[f64],
    gaps: &[f64],
    scales: &[f64],
    window: (f64, f64),
) -> Result<RateEstimate> {
    let (lo, hi) = window;
    let start = lo + BURN_IN * (hi - lo);
    let mut ts = Vec::new();
    let mut ys = Vec::new();
    let mut merged_at = None;
    for ((&t, &g), &s) in times.iter().zip(gaps).zip(scales) {
        if t < lo - 1e-12 || t > hi + 1e-12 {
            continue;
        }
        if g <= MERGE_TOL * (1.0 + s) {
            merged_at = Some(t);
            break;
        }
        if t >= start - 1e-12 {
            ts.push(t);
            ys.push(g.ln());
        }
    }
    if ts.len() < 3 {
        return Err(Error::DistanceUnderflow {
            time: merged_at.unwrap_or(lo),
        });
    }
    let (slope, _, residual) = fit_line(&ts, &ys);
    Ok(RateEstimate {
        nu_hat: -slope / 2.0,
        slope,
        window: (ts[0], ts[ts.len() - 1]),
        residual,
        merged_at,
    })
}

/// Empirical contraction rate of the nominal flow: slope of
/// `log |phi_t(Q1) - phi_t(Q2)|_2` over `window`, reported as `-slope / 2`.
pub fn estimate_contraction_rate(
    model: &FilterModel,
    q1: &SpdMatrix,
    q2: &SpdMatrix,
    t_end: f64,
    step: f64,
    window: (f64, f64),
) -> Result<RateEstimate> {
    if !(window.0 >= 0.0 && window.1 <= t_end + 1e-12 && window.0 < window.1) {
        return Err(Error::Precondition(format!(
            "window {window:?} must lie inside [0, {t_end}]"
        )));
    }
    let d0 = norm2(&(q1.as_mat() - q2.as_mat()));
    if d0 <= MERGE_TOL * (1.0 + norm2(q1)) {
        return Err(Error::DistanceUnderflow { time: 0.0 });
    }
    let f1 = flow(model, &DriftVariant::Nominal, q1, t_end, step, false)?;
    let f2 = flow(model, &DriftVariant::Nominal, q2, t_end, step, false)?;
    let gaps: Vec<f64> = f1
        .states
        .iter()
        .zip(&f2.states)
        .map(|(a, b): (&Mat, &Mat)| norm2(&(a - b)))
        .collect();
    let scales: Vec<f64> = f1.states.iter().map(norm2).collect();
    fit_decay(&f1.times, &gaps, &scales, window)
}
