//! Seeded test models used by the suites.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::matlib::{symmetrize, Mat, SpdMatrix, Vector};
use crate::regmaps::RegMap;
use crate::riccati::FilterModel;
use crate::rng::{self, Channel};
use crate::schemes::{recompose, AssociationScheme, BlockRing};

pub fn suite_rng(seed: u64, suite: u64, index: u64) -> ChaCha8Rng {
    rng::stream(seed, suite, index, Channel::Sample)
}

/// `G G' / n + floor Id`.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> Mat {
    let g = rng::normal_matrix(rng, n, n);
    symmetrize(&(&g * g.transpose() / n as f64 + Mat::identity(n, n) * floor))
}

/// Random symmetric matrix with unit-scale entries.
pub fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> Mat {
    symmetrize(&rng::normal_matrix(rng, n, n))
}

/// Controllable and observable model: `R`, `Sigma` positive definite and
/// `C` square and well conditioned. `shift` moves the spectrum of `A`
/// (negative for stable drifts, positive for unstable ones).
pub fn random_model(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> Result<FilterModel> {
    let g = rng::normal_matrix(rng, n, n);
    let a = &g * (0.5 / (n as f64).sqrt()) + Mat::identity(n, n) * shift;
    let r = random_spd(rng, n, 0.5);
    let k = rng::normal_matrix(rng, n, n);
    let c = Mat::identity(n, n) + &k * (0.3 / (n as f64).sqrt());
    let sigma = random_spd(rng, n, 0.5);
    let x0 = rng::normal_vector(rng, n);
    let p0 = random_spd(rng, n, 0.1);
    FilterModel::new(a, r, c, sigma, x0, p0)
}

/// Model whose `A`, `R`, `S` lie in the scheme's algebra, with
/// `a_q` in `[a_lo, a_hi]` and `r_q`, `s_q` in `[0.5, 1.5]`.
pub fn scheme_model(
    rng: &mut ChaCha8Rng,
    scheme: &AssociationScheme,
    a_lo: f64,
    a_hi: f64,
) -> Result<FilterModel> {
    let m = scheme.idempotent_count();
    let draw = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| -> Vec<f64> {
        (0..m).map(|_| rng.gen_range(lo..hi)).collect()
    };
    let a = recompose(scheme, &draw(rng, a_lo, a_hi))?;
    let r = recompose(scheme, &draw(rng, 0.5, 1.5))?;
    let s = recompose(scheme, &draw(rng, 0.5, 1.5))?;
    FilterModel::from_triplet(symmetrize(&a), symmetrize(&r), symmetrize(&s))
}

/// Model with block-diagonal `A`, `R`, `S` for the given ring;
/// `A` blocks are `shift Id + 0.3 G / sqrt(b)`.
pub fn block_model(rng: &mut ChaCha8Rng, ring: &BlockRing, shift: f64) -> Result<FilterModel> {
    let n = ring.dim();
    let mut a = Mat::zeros(n, n);
    let mut r = Mat::zeros(n, n);
    let mut s = Mat::zeros(n, n);
    for b in 0..ring.block_count() {
        let idx = ring.block_indices(b);
        let k = idx.len();
        let g = rng::normal_matrix(rng, k, k);
        let ab = Mat::identity(k, k) * shift + g * (0.3 / (k as f64).sqrt());
        let rb = random_spd(rng, k, 0.5);
        let sb = random_spd(rng, k, 0.5);
        for (p, &i) in idx.iter().enumerate() {
            for (q, &j) in idx.iter().enumerate() {
                a[(i, j)] = ab[(p, q)];
                r[(i, j)] = rb[(p, q)];
                s[(i, j)] = sb[(p, q)];
            }
        }
    }
    FilterModel::from_triplet(a, r, s)
}

/// Two contiguous blocks of sizes `ceil(n/2)` and `floor(n/2)`.
pub fn halves(n: usize) -> BlockRing {
    BlockRing::contiguous(&[n.div_ceil(2), n / 2]).expect("n >= 2")
}

/// Projection onto the cycle scheme for `n >= 3`, the trivial scheme for `n = 2`.
pub fn scheme_projection(n: usize) -> Result<RegMap> {
    let s = if n >= 3 {
        AssociationScheme::cycle(n)?
    } else {
        AssociationScheme::trivial(n)?
    };
    Ok(RegMap::scheme(Arc::new(s)))
}

pub fn spd(m: Mat) -> SpdMatrix {
    SpdMatrix::new(m).expect("constructed PSD")
}

pub fn zero_mean(n: usize) -> Vector {
    Vector::zeros(n)
}
