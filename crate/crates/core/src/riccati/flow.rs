use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matlib::{self, check_symmetric, symmetrize, Mat, SpdMatrix};

use super::drift::DriftVariant;
use super::model::FilterModel;

/// States whose Frobenius norm exceeds this abort the integration.
pub const BLOWUP_NORM: f64 = 1e12;

/// Relative PSD floor used when auditing flow states.
pub const STATE_PSD_TOL: f64 = 1e-10;

/// A state that failed PSD validation during integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsdViolation {
    pub time: f64,
    pub lambda_min: f64,
}

/// Time grid with the Riccati flow and, optionally, its transition matrices.
#[derive(Debug, Clone)]
pub struct FlowTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Mat>,
    /// `E_{0,t}`; `transitions[0]` is the identity.
    pub transitions: Option<Vec<Mat>>,
    pub step: f64,
    /// States outside the PSD floor. Reported, never silently repaired.
    pub psd_violations: Vec<PsdViolation>,
}

impl FlowTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory has at least the initial state")
    }

    pub fn final_state(&self) -> &Mat {
        self.states.last().expect("trajectory has at least the initial state")
    }

    pub fn final_transition(&self) -> Option<&Mat> {
        self.transitions.as_ref().and_then(|t| t.last())
    }

    /// Index of the grid point closest to `t`.
    pub fn index_near(&self, t: f64) -> usize {
        match self.times.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) if i >= self.times.len() => self.times.len() - 1,
            Err(i) => {
                if (t - self.times[i - 1]) <= (self.times[i] - t) {
                    i - 1
                } else {
                    i
                }
            }
        }
    }

    /// State at the grid point closest to `t`.
    pub fn state_near(&self, t: f64) -> &Mat {
        &self.states[self.index_near(t)]
    }

    /// The final state as a validated PSD matrix.
    pub fn final_spd(&self) -> Result<SpdMatrix> {
        SpdMatrix::with_tolerance(self.final_state().clone(), STATE_PSD_TOL)
    }

    /// CSV with columns `t, p_0_0, p_0_1, ...` (row-major), one row per step.
    pub fn to_csv(&self) -> String {
        let n = self.states.first().map_or(0, |m| m.nrows());
        let mut out = String::from("t");
        for i in 0..n {
            for j in 0..n {
                let _ = write!(out, ",p_{i}_{j}");
            }
        }
        out.push('\n');
        for (t, p) in self.times.iter().zip(&self.states) {
            let _ = write!(out, "{t:.17e}");
            for i in 0..n {
                for j in 0..n {
                    let _ = write!(out, ",{:.17e}", p[(i, j)]);
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Grid `0 = t_0 < ... < t_K = t_end` with steps of `step`, the last step
/// shortened when `t_end` is not a multiple of `step`.
pub(crate) fn time_grid(t_end: f64, step: f64) -> Vec<f64> {
    let k = ((t_end / step) - 1e-9).ceil().max(0.0) as usize;
    let mut times = Vec::with_capacity(k + 1);
    times.push(0.0);
    for i in 1..=k {
        times.push((i as f64 * step).min(t_end));
    }
    if k > 0 {
        times[k] = t_end;
    }
    times
}

fn check_flow_args(t_end: f64, step: f64) -> Result<()> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Precondition(format!("step must be positive, got {step}")));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::Precondition(format!("t_end must be >= 0, got {t_end}")));
    }
    Ok(())
}

fn blown_up(p: &Mat) -> Option<String> {
    if p.iter().any(|x| !x.is_finite()) {
        Some("non-finite state".into())
    } else if p.norm() > BLOWUP_NORM {
        Some(format!("|P|_F = {:.3e} exceeds {BLOWUP_NORM:.0e}", p.norm()))
    } else {
        None
    }
}

/// One classical RK4 step of the drift, co-integrating `dE = G(P) E` when
/// `e` is given. Returns the symmetrized new state.
fn rk4_step(
    model: &FilterModel,
    variant: &DriftVariant,
    p: &Mat,
    e: Option<&Mat>,
    h: f64,
) -> Result<(Mat, Option<Mat>)> {
    let k1 = variant.eval(model, p)?;
    let p2 = p + &k1 * (h / 2.0);
    let k2 = variant.eval(model, &p2)?;
    let p3 = p + &k2 * (h / 2.0);
    let k3 = variant.eval(model, &p3)?;
    let p4 = p + &k3 * h;
    let k4 = variant.eval(model, &p4)?;
    let next = symmetrize(&(p + (&k1 + &k2 * 2.0 + &k3 * 2.0 + &k4) * (h / 6.0)));

    let next_e = match e {
        None => None,
        Some(e) => {
            let l1 = variant.closed_loop(model, p)? * e;
            let l2 = variant.closed_loop(model, &p2)? * (e + &l1 * (h / 2.0));
            let l3 = variant.closed_loop(model, &p3)? * (e + &l2 * (h / 2.0));
            let l4 = variant.closed_loop(model, &p4)? * (e + &l3 * h);
            Some(e + (&l1 + &l2 * 2.0 + &l3 * 2.0 + &l4) * (h / 6.0))
        }
    };
    Ok((next, next_e))
}

/// Integrate the chosen Riccati drift from `q0` over `[0, t_end]` with
/// fixed-step RK4 and post-step symmetrization.
///
/// With `with_transitions`, also integrates `dE = (A_eff - G(P_t) S_eff) E`
/// from `E_0 = Id`. Blow-up (non-finite entries or `|P|_F > 1e12`) aborts
/// with the time of failure. PSD violations are recorded on the trajectory.
pub fn flow(
    model: &FilterModel,
    variant: &DriftVariant,
    q0: &SpdMatrix,
    t_end: f64,
    step: f64,
    with_transitions: bool,
) -> Result<FlowTrajectory> {
    check_flow_args(t_end, step)?;
    variant.validate(model)?;
    if q0.dim() != model.dim() {
        return Err(Error::dims(format!(
            "Q0 is {0}x{0}, model has dimension {1}",
            q0.dim(),
            model.dim()
        )));
    }
    let n = model.dim();
    let times = time_grid(t_end, step);
    let mut states = Vec::with_capacity(times.len());
    let mut transitions = with_transitions.then(|| Vec::with_capacity(times.len()));
    let mut violations = Vec::new();

    let mut p = q0.as_mat().clone();
    let mut e = with_transitions.then(|| Mat::identity(n, n));
    states.push(p.clone());
    if let (Some(ts), Some(e)) = (transitions.as_mut(), e.as_ref()) {
        ts.push(e.clone());
    }
    for w in times.windows(2) {
        let h = w[1] - w[0];
        let (np, ne) = rk4_step(model, variant, &p, e.as_ref(), h)?;
        if let Some(reason) = blown_up(&np) {
            return Err(Error::BlowUp { time: w[1], reason });
        }
        if let Some(ne) = ne.as_ref() {
            if let Some(reason) = blown_up(ne) {
                return Err(Error::BlowUp {
                    time: w[1],
                    reason: format!("transition matrix: {reason}"),
                });
            }
        }
        let ev = matlib::eigenvalues_sym(&np);
        let (lo, hi) = (ev[0], ev[n - 1]);
        if lo < -STATE_PSD_TOL * (1.0 + hi.max(0.0)) {
            violations.push(PsdViolation {
                time: w[1],
                lambda_min: lo,
            });
        }
        p = np;
        e = ne;
        states.push(p.clone());
        if let (Some(ts), Some(e)) = (transitions.as_mut(), e.as_ref()) {
            ts.push(e.clone());
        }
    }
    Ok(FlowTrajectory {
        times,
        states,
        transitions,
        step,
        psd_violations: violations,
    })
}

/// Final state of [`flow`] without storing the path.
pub fn flow_to(
    model: &FilterModel,
    variant: &DriftVariant,
    q0: &Mat,
    t: f64,
    step: f64,
) -> Result<Mat> {
    check_flow_args(t, step)?;
    variant.validate(model)?;
    check_symmetric(q0, "Q0")?;
    let mut p = q0.clone();
    for w in time_grid(t, step).windows(2) {
        let (np, _) = rk4_step(model, variant, &p, None, w[1] - w[0])?;
        if let Some(reason) = blown_up(&np) {
            return Err(Error::BlowUp { time: w[1], reason });
        }
        p = np;
    }
    Ok(p)
}

/// Variational flow: `d phi_t(Q) . H = E_t(Q) H E_t(Q)'` with the
/// co-integrated nominal transition matrix.
pub fn frechet_flow(model: &FilterModel, q: &SpdMatrix, h: &Mat, t: f64, step: f64) -> Result<Mat> {
    check_symmetric(h, "H")?;
    if h.nrows() != model.dim() {
        return Err(Error::dims("H and model dimensions differ"));
    }
    let traj = flow(model, &DriftVariant::Nominal, q, t, step, true)?;
    let e = traj.final_transition().expect("transitions requested");
    Ok(symmetrize(&(e * h * e.transpose())))
}
