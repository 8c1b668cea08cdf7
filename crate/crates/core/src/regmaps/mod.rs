//! Covariance regularization maps `pi` and the objects they induce.
//!
//! Maps come in two families: perturbations of the identity
//! (inflation, Stein shrinkage) and idempotent projections (0/1 Hadamard
//! masks, Bose-Mesner projections). The Nystrom target sits in between.
//! `apply` returns a plain matrix because a general band mask need not
//! preserve positivity.

mod config;
mod h3;
mod nystrom;

pub use config::RegMapConfig;
pub use h3::{check_h3, H3Report};
pub use nystrom::{
    nystrom_bias, nystrom_monte_carlo, nystrom_sample_estimate, nystrom_target, NystromMc,
    Partition,
};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::matlib::{check_square, norm2, symmetrize, Mat, SpdMatrix};
use crate::riccati::{FilterModel, Triplet};
use crate::schemes::{self, AssociationScheme, BlockRing};

/// Target of a Stein-shrinkage map.
#[derive(Debug, Clone)]
pub enum TargetSpec {
    /// `L_iota (.) Q` with the band mask `L_iota(i,j) = 1{|i-j| < iota}`.
    MaskBand { iota: usize },
    /// Bose-Mesner projection onto a scheme's algebra.
    SchemeTarget(Arc<AssociationScheme>),
    /// Nystrom completion of the complement block.
    NystromTarget(Partition),
}

impl TargetSpec {
    pub fn check_dim(&self, n: usize) -> Result<()> {
        match self {
            TargetSpec::MaskBand { iota } => {
                if *iota == 0 || *iota > n {
                    return Err(Error::Precondition(format!(
                        "band width iota = {iota} must lie in 1..={n}"
                    )));
                }
                Ok(())
            }
            TargetSpec::SchemeTarget(s) => check_points(s, n),
            TargetSpec::NystromTarget(p) => p.check_dim(n),
        }
    }

    /// `T(Q)`.
    pub fn apply(&self, q: &Mat) -> Result<Mat> {
        self.check_dim(q.nrows())?;
        match self {
            TargetSpec::MaskBand { iota } => Ok(q.component_mul(&band_mask(q.nrows(), *iota))),
            TargetSpec::SchemeTarget(s) => schemes::project(s, q),
            TargetSpec::NystromTarget(p) => nystrom_target(q, p),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TargetSpec::MaskBand { .. } => "mask-band",
            TargetSpec::SchemeTarget(_) => "scheme",
            TargetSpec::NystromTarget(_) => "nystrom",
        }
    }
}

/// A regularization map.
#[derive(Debug, Clone)]
pub enum RegMap {
    Identity,
    /// `Q + epsilon T`.
    Inflation { epsilon: f64, t: SpdMatrix },
    /// `L (.) Q`; `heuristic` marks masks with entries outside `{0, 1}`.
    HadamardMask { mask: SpdMatrix, heuristic: bool },
    /// Frobenius-orthogonal projection onto a Bose-Mesner algebra.
    SchemeProjection(Arc<AssociationScheme>),
    /// `Q + eps(Q) (T(Q) - Q)` with `eps(Q) = eps1 1{l_T(Q) <= 1/eps2}`.
    SteinShrinkage {
        eps1: f64,
        eps2: f64,
        target: TargetSpec,
    },
    /// Nystrom target map.
    Nystrom { partition: Partition },
}

impl RegMap {
    pub fn inflation(epsilon: f64, t: Mat) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::Precondition(format!(
                "inflation epsilon must lie in [0, 1], got {epsilon}"
            )));
        }
        Ok(RegMap::Inflation {
            epsilon,
            t: SpdMatrix::new(t)?,
        })
    }

    /// Hadamard mask; a mask that is not PSD is rejected.
    pub fn mask(l: Mat) -> Result<Self> {
        let heuristic = l.iter().any(|&v| v != 0.0 && v != 1.0);
        Ok(RegMap::HadamardMask {
            mask: SpdMatrix::new(l)?,
            heuristic,
        })
    }

    /// 0/1 block-diagonal mask of a block ring.
    pub fn block_mask(ring: &BlockRing) -> Self {
        RegMap::HadamardMask {
            mask: SpdMatrix::new(ring.mask()).expect("block mask is PSD"),
            heuristic: false,
        }
    }

    pub fn scheme(scheme: Arc<AssociationScheme>) -> Self {
        RegMap::SchemeProjection(scheme)
    }

    pub fn shrinkage(eps1: f64, eps2: f64, target: TargetSpec) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps1) || !(eps2 > 0.0 && eps2.is_finite()) {
            return Err(Error::Precondition(format!(
                "shrinkage needs eps1 in [0, 1] and eps2 > 0, got ({eps1}, {eps2})"
            )));
        }
        Ok(RegMap::SteinShrinkage { eps1, eps2, target })
    }

    pub fn nystrom(partition: Partition) -> Self {
        RegMap::Nystrom { partition }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RegMap::Identity => "identity",
            RegMap::Inflation { .. } => "inflation",
            RegMap::HadamardMask { .. } => "mask",
            RegMap::SchemeProjection(_) => "scheme",
            RegMap::SteinShrinkage { .. } => "shrinkage",
            RegMap::Nystrom { .. } => "nystrom",
        }
    }

    /// Masks with entries outside `{0, 1}` carry no rigorous guarantees.
    pub fn is_heuristic(&self) -> bool {
        matches!(self, RegMap::HadamardMask { heuristic: true, .. })
    }

    /// Whether `pi o pi = pi` holds by construction.
    pub fn is_idempotent(&self) -> bool {
        match self {
            RegMap::Identity | RegMap::SchemeProjection(_) | RegMap::Nystrom { .. } => true,
            RegMap::HadamardMask { heuristic, .. } => !heuristic,
            RegMap::Inflation { epsilon, .. } => *epsilon == 0.0,
            RegMap::SteinShrinkage { .. } => false,
        }
    }

    pub fn check_dim(&self, n: usize) -> Result<()> {
        let fixed = match self {
            RegMap::Identity => return Ok(()),
            RegMap::Inflation { t, .. } => t.dim(),
            RegMap::HadamardMask { mask, .. } => mask.dim(),
            RegMap::SchemeProjection(s) => return check_points(s, n),
            RegMap::SteinShrinkage { target, .. } => return target.check_dim(n),
            RegMap::Nystrom { partition } => return partition.check_dim(n),
        };
        if fixed != n {
            return Err(Error::dims(format!(
                "{} map has dimension {fixed}, state has dimension {n}",
                self.name()
            )));
        }
        Ok(())
    }

    /// `pi(Q)`.
    pub fn apply(&self, q: &Mat) -> Result<Mat> {
        check_square(q, "Q")?;
        self.check_dim(q.nrows())?;
        Ok(match self {
            RegMap::Identity => q.clone(),
            RegMap::Inflation { epsilon, t } => q + t.as_mat() * *epsilon,
            RegMap::HadamardMask { mask, .. } => q.component_mul(mask),
            RegMap::SchemeProjection(s) => schemes::project(s, q)?,
            RegMap::SteinShrinkage { .. } => {
                let (eps, target) = self.shrinkage_weight(q)?;
                match target {
                    Some(t) => q + (t - q) * eps,
                    None => q.clone(),
                }
            }
            RegMap::Nystrom { partition } => nystrom_target(q, partition)?,
        })
    }

    /// `eps(Q)` and `T(Q)` for a shrinkage map (target omitted when the
    /// indicator is off).
    fn shrinkage_weight(&self, q: &Mat) -> Result<(f64, Option<Mat>)> {
        let RegMap::SteinShrinkage { eps1, eps2, target } = self else {
            return Ok((0.0, None));
        };
        let l = mask_deviation_bound(q, target)?;
        // ties count as inside the threshold
        if l <= 1.0 / eps2 && *eps1 > 0.0 {
            Ok((*eps1, Some(target.apply(q)?)))
        } else {
            Ok((0.0, None))
        }
    }
}

fn check_points(s: &AssociationScheme, n: usize) -> Result<()> {
    if s.points() != n {
        return Err(Error::dims(format!(
            "scheme on {} points, state has dimension {n}",
            s.points()
        )));
    }
    Ok(())
}

/// `pi(Q)` for a map applied to a PSD matrix.
pub fn apply(map: &RegMap, q: &SpdMatrix) -> Result<Mat> {
    map.apply(q)
}

/// Band mask `L_iota(i,j) = 1{|i-j| < iota}`.
pub fn band_mask(n: usize, iota: usize) -> Mat {
    Mat::from_fn(n, n, |i, j| if i.abs_diff(j) < iota { 1.0 } else { 0.0 })
}

/// Upper bound on `|Q - T(Q)|_2` used by the shrinkage indicator.
///
/// Band targets use the Gershgorin row sum `max_i sum_{|i-j| >= iota} |Q_ij|`,
/// scheme targets `tr(Q)`, Nystrom targets the trace of the Schur complement.
pub fn mask_deviation_bound(q: &Mat, target: &TargetSpec) -> Result<f64> {
    check_square(q, "Q")?;
    target.check_dim(q.nrows())?;
    let n = q.nrows();
    Ok(match target {
        TargetSpec::MaskBand { iota } => (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| i.abs_diff(j) >= *iota)
                    .map(|j| q[(i, j)].abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max),
        TargetSpec::SchemeTarget(_) => q.trace(),
        TargetSpec::NystromTarget(p) => nystrom::schur_complement(q, p)?.trace().max(0.0),
    })
}

/// `Gamma_pi(Q) = Ricc^pi(Q) - Ricc(Q) = (Q - pi(Q)) S (Q - pi(Q))`.
pub fn gamma_pi(map: &RegMap, q: &Mat, model: &FilterModel) -> Result<Mat> {
    map.check_dim(model.dim())?;
    let d = q - map.apply(q)?;
    Ok(symmetrize(&(&d * model.s().as_mat() * &d)))
}

/// Triplet `(A_pi, R_pi, S_pi)` whose nominal flow dominates the perturbed
/// flow of `map`.
///
/// Inflation adds its constant `eps^2 T S T` to `R`; shrinkage adds
/// `(eps1/eps2)^2 |S|_2 Id`, the supremum of `|Gamma_pi|_2` over the region
/// where the indicator is on.
pub fn induced_triplet(map: &RegMap, model: &FilterModel) -> Result<Triplet> {
    map.check_dim(model.dim())?;
    let n = model.dim();
    let a = model.a().clone();
    let r = model.r().as_mat().clone();
    let s = model.s().as_mat().clone();
    let extra = match map {
        RegMap::Identity => Mat::zeros(n, n),
        RegMap::Inflation { epsilon, t } => {
            symmetrize(&(t.as_mat() * &s * t.as_mat() * (epsilon * epsilon)))
        }
        RegMap::SteinShrinkage { eps1, eps2, .. } => {
            Mat::identity(n, n) * ((eps1 / eps2).powi(2) * norm2(&s))
        }
        other => {
            return Err(Error::Unsupported(format!(
                "{} maps have no induced triplet",
                other.name()
            )))
        }
    };
    Triplet::new(a, r + extra, s)
}

#[cfg(test)]
mod tests;
