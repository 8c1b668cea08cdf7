use crate::error::{Error, Result};
use crate::matlib::{sqrt_psd, Vector};
use crate::riccati::{time_grid, FilterModel};
use crate::rng::{self, Channel};

/// Signal path and observation increments on a fixed grid.
#[derive(Debug, Clone)]
pub struct PathBundle {
    pub times: Vec<f64>,
    /// `X_{t_k}` for every grid point.
    pub signal: Vec<Vector>,
    /// `Y_{t_{k+1}} - Y_{t_k}`, one per grid interval.
    pub increments: Vec<Vector>,
    pub seed: u64,
    pub replicate: u64,
    t_end: f64,
    step: f64,
}

impl PathBundle {
    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    /// Nominal grid step.
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Grid index closest to `t`.
    pub fn index_near(&self, t: f64) -> usize {
        let mut best = 0;
        for (k, &s) in self.times.iter().enumerate() {
            if (s - t).abs() < (self.times[best] - t).abs() {
                best = k;
            }
        }
        best
    }

    /// `Y_{t_k}` with `Y_0 = 0`.
    pub fn cumulative_observations(&self) -> Vec<Vector> {
        let m = self.increments.first().map_or(0, |v| v.len());
        let mut y = Vector::zeros(m);
        let mut out = vec![y.clone()];
        for d in &self.increments {
            y += d;
            out.push(y.clone());
        }
        out
    }

    /// CSV with header `t,x_1..x_r,y_1..y_m` (cumulative observations).
    pub fn to_csv(&self) -> String {
        let n = self.signal.first().map_or(0, |v| v.len());
        let ys = self.cumulative_observations();
        let m = ys.first().map_or(0, |v| v.len());
        let mut out = String::from("t");
        for i in 1..=n {
            out.push_str(&format!(",x_{i}"));
        }
        for i in 1..=m {
            out.push_str(&format!(",y_{i}"));
        }
        out.push('\n');
        for (k, t) in self.times.iter().enumerate() {
            out.push_str(&format!("{t:.10e}"));
            for v in self.signal[k].iter().chain(ys[k].iter()) {
                out.push_str(&format!(",{v:.10e}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Euler-Maruyama paths of `dX = AX dt + R^{1/2} dW`, `dY = CX dt + Sigma^{1/2} dV`
/// with `X_0 ~ N(x0_mean, P0)` and `Y_0 = 0`.
pub fn simulate_signal_obs(model: &FilterModel, t_end: f64, step: f64, seed: u64) -> Result<PathBundle> {
    simulate_replicate(model, t_end, step, seed, 0)
}

/// Replicate `replicate` of the path family keyed by `seed`.
pub fn simulate_replicate(
    model: &FilterModel,
    t_end: f64,
    step: f64,
    seed: u64,
    replicate: u64,
) -> Result<PathBundle> {
    if !(step > 0.0 && step.is_finite() && t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::Precondition(format!(
            "need step > 0 and t_end >= 0, got step = {step}, t_end = {t_end}"
        )));
    }
    let n = model.dim();
    let m = model.obs_dim();
    let times = time_grid(t_end, step);
    let mut init = rng::stream(seed, replicate, 0, Channel::Initial);
    let mut sig = rng::stream(seed, replicate, 0, Channel::Signal);
    let mut obs = rng::stream(seed, replicate, 0, Channel::Observation);
    let p0_root = sqrt_psd(model.p0());
    let mut x = model.x0_mean() + &p0_root * rng::normal_vector(&mut init, n);
    let mut signal = Vec::with_capacity(times.len());
    let mut increments = Vec::with_capacity(times.len().saturating_sub(1));
    signal.push(x.clone());
    for w in times.windows(2) {
        let h = w[1] - w[0];
        let sh = h.sqrt();
        let dw = rng::normal_vector(&mut sig, n) * sh;
        let dv = rng::normal_vector(&mut obs, m) * sh;
        let dy = model.c() * &x * h + model.sigma_sqrt() * dv;
        x = &x + model.a() * &x * h + model.r_sqrt() * dw;
        increments.push(dy);
        signal.push(x.clone());
    }
    Ok(PathBundle {
        times,
        signal,
        increments,
        seed,
        replicate,
        t_end,
        step,
    })
}
