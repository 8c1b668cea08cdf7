use crate::error::{Error, Result};
use crate::matlib::{check_symmetric, symmetrize, Mat};
use crate::regmaps::RegMap;

use super::model::{FilterModel, Triplet};

/// Which Riccati drift a flow integrates.
#[derive(Debug, Clone)]
pub enum DriftVariant {
    /// `AQ + QA' - QSQ + R`.
    Nominal,
    /// Gain regularized through a map `pi`:
    /// `(A - pi(Q)S)Q + Q(A - pi(Q)S)' + R + pi(Q) S pi(Q)`.
    Perturbed(RegMap),
    /// Nominal drift with `(A, R, S)` replaced by another triplet.
    Triplet(Triplet),
    /// Mean-repulsion drift: nominal with `S` scaled by `1 + 2(eps1 + eps2)`.
    MeanRepulsion { eps1: f64, eps2: f64 },
}

impl DriftVariant {
    pub fn validate(&self, model: &FilterModel) -> Result<()> {
        match self {
            DriftVariant::Nominal => Ok(()),
            DriftVariant::Perturbed(map) => map.check_dim(model.dim()),
            DriftVariant::Triplet(t) => {
                t.validate()?;
                if t.dim() != model.dim() {
                    return Err(Error::dims(format!(
                        "triplet of dimension {} for a model of dimension {}",
                        t.dim(),
                        model.dim()
                    )));
                }
                Ok(())
            }
            DriftVariant::MeanRepulsion { eps1, eps2 } => check_repulsion(*eps1, *eps2),
        }
    }

    /// Drift evaluated at `q` (unchecked shapes; call [`Self::validate`] first).
    pub(crate) fn eval(&self, model: &FilterModel, q: &Mat) -> Result<Mat> {
        Ok(match self {
            DriftVariant::Nominal => ricc_raw(model.a(), model.r(), model.s(), q),
            DriftVariant::Perturbed(map) => ricc_pi_raw(model, &map.apply(q)?, q),
            DriftVariant::Triplet(t) => ricc_raw(&t.a, &t.r, &t.s, q),
            DriftVariant::MeanRepulsion { eps1, eps2 } => {
                let k = repulsion_factor(*eps1, *eps2);
                ricc_raw(model.a(), model.r(), &(model.s().as_mat() * k), q)
            }
        })
    }

    /// Generator of the transition matrix along the flow at state `q`:
    /// `A_eff - G(q) S_eff` with `G(q) = pi(q)` for perturbed drifts and `q`
    /// otherwise.
    pub(crate) fn closed_loop(&self, model: &FilterModel, q: &Mat) -> Result<Mat> {
        Ok(match self {
            DriftVariant::Nominal => model.a() - q * model.s().as_mat(),
            DriftVariant::Perturbed(map) => model.a() - map.apply(q)? * model.s().as_mat(),
            DriftVariant::Triplet(t) => &t.a - q * &t.s,
            DriftVariant::MeanRepulsion { eps1, eps2 } => {
                model.a() - q * model.s().as_mat() * repulsion_factor(*eps1, *eps2)
            }
        })
    }

    /// The `(A, R, S)` triplet whose nominal drift this variant equals, when
    /// one exists (perturbed drifts have none).
    pub fn effective_triplet(&self, model: &FilterModel) -> Option<Triplet> {
        match self {
            DriftVariant::Nominal => Some(model.triplet()),
            DriftVariant::Triplet(t) => Some(t.clone()),
            DriftVariant::MeanRepulsion { eps1, eps2 } => Some(Triplet {
                a: model.a().clone(),
                r: model.r().as_mat().clone(),
                s: model.s().as_mat() * repulsion_factor(*eps1, *eps2),
            }),
            DriftVariant::Perturbed(_) => None,
        }
    }
}

fn check_repulsion(eps1: f64, eps2: f64) -> Result<()> {
    if !(eps1.is_finite() && eps2.is_finite()) || eps1 + eps2 <= -0.5 {
        return Err(Error::Precondition(format!(
            "mean repulsion needs eps1 + eps2 > -1/2, got {eps1} + {eps2}"
        )));
    }
    Ok(())
}

/// `1 + 2(eps1 + eps2)`.
pub fn repulsion_factor(eps1: f64, eps2: f64) -> f64 {
    1.0 + 2.0 * (eps1 + eps2)
}

pub(crate) fn ricc_raw(a: &Mat, r: &Mat, s: &Mat, q: &Mat) -> Mat {
    let aq = a * q;
    let qsq = q * s * q;
    symmetrize(&(&aq + aq.transpose() - qsq + r))
}

fn ricc_pi_raw(model: &FilterModel, piq: &Mat, q: &Mat) -> Mat {
    let s = model.s().as_mat();
    let f = model.a() - piq * s;
    let fq = &f * q;
    symmetrize(&(&fq + fq.transpose() + model.r().as_mat() + piq * s * piq))
}

fn check_state(q: &Mat, model: &FilterModel) -> Result<()> {
    check_symmetric(q, "Q")?;
    if q.nrows() != model.dim() {
        return Err(Error::dims(format!(
            "Q is {0}x{0}, model has dimension {1}",
            q.nrows(),
            model.dim()
        )));
    }
    Ok(())
}

/// Nominal Riccati drift `AQ + QA' - QSQ + R`.
pub fn ricc(q: &Mat, model: &FilterModel) -> Result<Mat> {
    check_state(q, model)?;
    Ok(ricc_raw(model.a(), model.r(), model.s(), q))
}

/// Riccati drift with the gain regularized through `map`.
pub fn ricc_pi(q: &Mat, model: &FilterModel, map: &RegMap) -> Result<Mat> {
    check_state(q, model)?;
    map.check_dim(model.dim())?;
    Ok(ricc_pi_raw(model, &map.apply(q)?, q))
}

/// Mean-repulsion drift in closed form: `AQ + QA' + R - (1 + 2(eps1+eps2)) QSQ`.
pub fn ricc_repulsion(q: &Mat, model: &FilterModel, eps1: f64, eps2: f64) -> Result<Mat> {
    check_state(q, model)?;
    check_repulsion(eps1, eps2)?;
    let s = model.s().as_mat() * repulsion_factor(eps1, eps2);
    Ok(ricc_raw(model.a(), model.r(), &s, q))
}

/// Mean-repulsion covariance drift in its expanded form with repulsion maps
/// `T1(Q) = eps1 Q S` and `T2 = eps2 Id`:
/// `AQ + QA' + R - QSQ - QS T2 Q - (T1(Q) Q + Q T1(Q)') - Q T2 S Q`.
pub fn ricc_repulsion_expanded(q: &Mat, model: &FilterModel, eps1: f64, eps2: f64) -> Result<Mat> {
    check_state(q, model)?;
    check_repulsion(eps1, eps2)?;
    let n = model.dim();
    let a = model.a();
    let s = model.s().as_mat();
    let t1 = q * s * eps1;
    let t2 = Mat::identity(n, n) * eps2;
    let out = a * q + q * a.transpose() + model.r().as_mat()
        - q * s * q
        - q * s * &t2 * q
        - (&t1 * q + q * t1.transpose())
        - q * &t2 * s * q;
    Ok(symmetrize(&out))
}

/// Frechet derivative of the nominal drift at `q` in direction `h`:
/// `(A - QS) H + H (A - QS)'`.
pub fn frechet_ricc(q: &Mat, h: &Mat, model: &FilterModel) -> Result<Mat> {
    check_state(q, model)?;
    check_symmetric(h, "H")?;
    if h.nrows() != model.dim() {
        return Err(Error::dims("H and Q dimensions differ"));
    }
    let f = model.a() - q * model.s().as_mat();
    let fh = &f * h;
    Ok(symmetrize(&(&fh + fh.transpose())))
}
