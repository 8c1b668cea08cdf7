use serde::Serialize;

use crate::error::{Error, Result};
use crate::matlib::{lambda_min, symmetrize, Mat};
use crate::rng::{self, Channel};

use super::RegMap;

/// Outcome of sampling the projection identities of an idempotent map.
#[derive(Debug, Clone, Serialize)]
pub struct H3Report {
    pub map: String,
    pub samples: usize,
    /// `max |pi(B[Q - pi(Q)] + [Q - pi(Q)]B)|_F` over samples.
    pub max_residual: f64,
    /// `max |pi(pi(Q)) - pi(Q)|_F`.
    pub max_idempotence: f64,
    /// `min lambda_min(pi(GG') - pi(G)pi(G)')`; non-negative up to rounding.
    pub min_schwarz_margin: f64,
}

impl H3Report {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_residual <= tol && self.max_idempotence <= tol && self.min_schwarz_margin >= -tol
    }
}

/// Sample `Q` (random SPD), ring elements `B = pi(M)` (random symmetric `M`)
/// and general `G`, and evaluate the projection identities.
pub fn check_h3(map: &RegMap, dim: usize, samples: usize, seed: u64) -> Result<H3Report> {
    if !map.is_idempotent() || matches!(map, RegMap::Nystrom { .. }) {
        return Err(Error::Precondition(format!(
            "{} map is not a linear projection",
            map.name()
        )));
    }
    map.check_dim(dim)?;
    let mut max_residual = 0.0_f64;
    let mut max_idempotence = 0.0_f64;
    let mut min_margin = f64::INFINITY;
    for k in 0..samples {
        let mut rng = rng::stream(seed, k as u64, 0, Channel::Sample);
        let g = rng::normal_matrix(&mut rng, dim, dim);
        let q = symmetrize(&(&g * g.transpose() / dim as f64));
        let b = map.apply(&symmetrize(&rng::normal_matrix(&mut rng, dim, dim)))?;
        let g2 = rng::normal_matrix(&mut rng, dim, dim);

        let pq = map.apply(&q)?;
        let d: Mat = &q - &pq;
        let residual = map.apply(&(&b * &d + &d * &b))?.norm();
        max_residual = max_residual.max(residual);
        max_idempotence = max_idempotence.max((map.apply(&pq)? - &pq).norm());

        let pg = map.apply(&g2)?;
        let lhs = map.apply(&(&g2 * g2.transpose()))?;
        min_margin = min_margin.min(lambda_min(&symmetrize(&(lhs - &pg * pg.transpose()))));
    }
    Ok(H3Report {
        map: map.name().to_string(),
        samples,
        max_residual,
        max_idempotence,
        min_schwarz_margin: if samples == 0 { 0.0 } else { min_margin },
    })
}
