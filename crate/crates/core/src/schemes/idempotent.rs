use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matlib::{eigh, symmetrize, Mat};

use super::AssociationScheme;

/// Default eigenvalue grouping tolerance, relative to the eigenvalue spread.
pub const DEFAULT_GROUPING_TOL: f64 = 1e-8;
const MAX_ATTEMPTS: usize = 5;
const SEED_BASE: u64 = 0x1de4_0b07;
/// Clusters closer than this multiple of the grouping tolerance are ambiguous.
const SEPARATION_FACTOR: f64 = 1e3;

/// Minimal idempotents `D_0 = J/r, D_1, ...` and `eigen_table[k][q] = lambda_k(B_q)`.
#[derive(Debug, Clone)]
pub struct IdempotentBasis {
    pub projectors: Vec<Mat>,
    pub eigen_table: Vec<Vec<f64>>,
    /// Random combinations tried before the grouping was accepted.
    pub attempts: usize,
}

/// Common eigenprojectors of the adjacency basis.
///
/// A seeded random combination `sum_q c_q B_q` is diagonalized and its
/// eigenvalues grouped at `tol * spread`. A grouping is rejected when two
/// clusters sit too close together or a projector fails to be a common
/// eigenprojector; a fresh combination is then tried, up to five times.
pub fn idempotents(scheme: &AssociationScheme, tol: f64) -> Result<IdempotentBasis> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::Precondition(format!(
            "grouping tolerance must lie in (0, 1), got {tol}"
        )));
    }
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(SEED_BASE + attempt as u64);
        if let Some(mut basis) = try_combination(scheme, tol, &mut rng) {
            basis.attempts = attempt + 1;
            return Ok(basis);
        }
    }
    Err(Error::GroupingAmbiguity {
        attempts: MAX_ATTEMPTS,
    })
}

fn try_combination(
    scheme: &AssociationScheme,
    tol: f64,
    rng: &mut ChaCha8Rng,
) -> Option<IdempotentBasis> {
    let r = scheme.points();
    let adj = scheme.adjacency();
    let mut m = Mat::zeros(r, r);
    for b in &adj[1..] {
        m += b * rng.gen_range(-1.0..1.0);
    }
    let (vals, vecs) = eigh(&m);
    let spread = vals[r - 1] - vals[0];
    let scale = if spread > 0.0 { spread } else { 1.0 };

    let mut clusters: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for k in 1..=r {
        if k == r || vals[k] - vals[k - 1] > tol * scale {
            if k < r && vals[k] - vals[k - 1] < SEPARATION_FACTOR * tol * scale {
                return None;
            }
            clusters.push((start, k));
            start = k;
        }
    }

    let mut projectors = Vec::with_capacity(clusters.len());
    for &(lo, hi) in &clusters {
        let v = vecs.columns(lo, hi - lo);
        let p = symmetrize(&(&v * v.transpose()));
        // exact projectors are class-constant; averaging removes eigensolver noise
        projectors.push(super::project(scheme, &p).ok()?);
    }

    let mut table = Vec::with_capacity(projectors.len());
    for p in &projectors {
        let pp = p.dot(p);
        let mut row = Vec::with_capacity(adj.len());
        for b in adj {
            let lambda = b.dot(p) / pp;
            if (b * p - p * lambda).norm() > 1e-8 * (1.0 + b.norm()) {
                return None;
            }
            row.push(lambda);
        }
        table.push(row);
    }

    let valencies: Vec<f64> = scheme.valencies().iter().map(|&v| v as f64).collect();
    let trivial = table.iter().position(|row| {
        row.iter()
            .zip(&valencies)
            .all(|(l, v)| (l - v).abs() <= 1e-8 * (1.0 + v))
    })?;
    if (projectors[trivial].trace() - 1.0).abs() > 1e-8 {
        return None;
    }

    let mut order: Vec<usize> = (0..projectors.len()).filter(|&k| k != trivial).collect();
    order.sort_by(|&x, &y| {
        for (a, b) in table[x].iter().zip(&table[y]).skip(1) {
            if (a - b).abs() > 1e-9 * (1.0 + a.abs()) {
                return b.partial_cmp(a).unwrap();
            }
        }
        std::cmp::Ordering::Equal
    });
    let mut out_p = vec![Mat::from_element(r, r, 1.0 / r as f64)];
    let mut out_t = vec![valencies.clone()];
    for k in order {
        out_p.push(projectors[k].clone());
        out_t.push(table[k].clone());
    }
    Some(IdempotentBasis {
        projectors: out_p,
        eigen_table: out_t,
        attempts: 0,
    })
}
