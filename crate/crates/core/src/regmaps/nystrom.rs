use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matlib::{check_square, pinv_sym, sqrt_psd, symmetrize, Mat, SpdMatrix};
use crate::rng::{self, Channel};

/// Relative singular-value cutoff for the pseudo-inverse of `Q_P`.
const PINV_TOL: f64 = 1e-12;

/// Proper, non-empty index set `P` (0-based, sorted, distinct).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    indices: Vec<usize>,
}

impl Partition {
    pub fn new(mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if indices.is_empty() {
            return Err(Error::Precondition("partition must be non-empty".into()));
        }
        Ok(Self { indices })
    }

    /// From a 1-based index list, as written in config files.
    pub fn from_one_based(indices: &[usize]) -> Result<Self> {
        if indices.contains(&0) {
            return Err(Error::Config("partition indices are 1-based".into()));
        }
        Self::new(indices.iter().map(|i| i - 1).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// `s = |P|`.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn complement(&self, n: usize) -> Vec<usize> {
        (0..n).filter(|i| !self.indices.contains(i)).collect()
    }

    pub fn check_dim(&self, n: usize) -> Result<()> {
        if self.indices.iter().any(|&i| i >= n) {
            return Err(Error::dims(format!(
                "partition index out of range for dimension {n}"
            )));
        }
        if self.indices.len() >= n {
            return Err(Error::Precondition(format!(
                "partition of size {} is not proper in dimension {n}",
                self.indices.len()
            )));
        }
        Ok(())
    }
}

/// `Q_{Pc,P} Q_P^+ Q_{P,Pc}`.
fn completion_block(q: &Mat, p: &Partition) -> Result<(Mat, Vec<usize>)> {
    check_square(q, "Q")?;
    p.check_dim(q.nrows())?;
    let pc = p.complement(q.nrows());
    let qp = q.select_rows(p.indices()).select_columns(p.indices());
    let qcp = q.select_rows(&pc).select_columns(p.indices());
    let block = symmetrize(&(&qcp * pinv_sym(&symmetrize(&qp), PINV_TOL) * qcp.transpose()));
    Ok((block, pc))
}

fn place_block(m: &mut Mat, idx: &[usize], block: &Mat) {
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            m[(i, j)] = block[(a, b)];
        }
    }
}

/// Schur complement `Q_{Pc} - Q_{Pc,P} Q_P^+ Q_{P,Pc}`.
pub(crate) fn schur_complement(q: &Mat, p: &Partition) -> Result<Mat> {
    let (block, pc) = completion_block(q, p)?;
    let qc = q.select_rows(&pc).select_columns(&pc);
    Ok(symmetrize(&(qc - block)))
}

/// `T(Q) = (J - L_{Pc}) (.) Q + L_{Pc} (.) [Q_{Pc,P} Q_P^+ Q_{P,Pc}]`.
pub fn nystrom_target(q: &Mat, p: &Partition) -> Result<Mat> {
    let (block, pc) = completion_block(q, p)?;
    let mut out = q.clone();
    place_block(&mut out, &pc, &block);
    Ok(out)
}

/// Expected Nystrom target of the `N`-sample covariance of `N(m, Q)` with the
/// mean known: `T(Q) + (s/N) L_{Pc} (.) [Q_{Pc} - Q_{Pc,P} Q_P^+ Q_{P,Pc}]`.
pub fn nystrom_bias(q: &Mat, p: &Partition, n_samples: usize) -> Result<Mat> {
    if n_samples == 0 {
        return Err(Error::Precondition("sample count must be at least 1".into()));
    }
    let (block, pc) = completion_block(q, p)?;
    let qc = q.select_rows(&pc).select_columns(&pc);
    let schur = &qc - &block;
    let mut out = q.clone();
    let w = p.len() as f64 / n_samples as f64;
    place_block(&mut out, &pc, &symmetrize(&(block + schur * w)));
    Ok(out)
}

/// `T(p0)` for the sample covariance `p0 = zeta' zeta / N` of centered samples
/// (rows of `zeta`), built from the orthogonal projection onto the span of the
/// `P` columns: the complement block is `zeta_Pc' V (V'V)^+ V' zeta_Pc / N`
/// with `V = zeta_P`.
pub fn nystrom_sample_estimate(zeta: &Mat, p: &Partition) -> Result<Mat> {
    let n = zeta.ncols();
    p.check_dim(n)?;
    let big_n = zeta.nrows() as f64;
    let pc = p.complement(n);
    let v = zeta.select_columns(p.indices());
    let g = symmetrize(&(v.transpose() * &v));
    let proj = &v * pinv_sym(&g, PINV_TOL) * v.transpose();
    let zc = zeta.select_columns(&pc);
    let mut out = zeta.transpose() * zeta / big_n;
    place_block(&mut out, &pc, &symmetrize(&(zc.transpose() * proj * zc / big_n)));
    Ok(symmetrize(&out))
}

/// Monte Carlo mean of the Nystrom sample estimator with its standard errors.
#[derive(Debug, Clone, Serialize)]
pub struct NystromMc {
    pub replicates: usize,
    pub samples: usize,
    pub mean: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
}

impl NystromMc {
    pub fn mean_mat(&self) -> Mat {
        rows_to_mat(&self.mean)
    }

    pub fn stderr_mat(&self) -> Mat {
        rows_to_mat(&self.stderr)
    }
}

fn rows_to_mat(rows: &[Vec<f64>]) -> Mat {
    let n = rows.len();
    Mat::from_fn(n, n, |i, j| rows[i][j])
}

fn mat_to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Replicates of `T(p0)` for `N` samples of `N(0, Q)`, centered at the known
/// mean. Replicates run in parallel on independent seeded streams and are
/// reduced in replicate order.
pub fn nystrom_monte_carlo(
    q: &SpdMatrix,
    p: &Partition,
    n_samples: usize,
    replicates: usize,
    seed: u64,
) -> Result<NystromMc> {
    if n_samples == 0 || replicates < 2 {
        return Err(Error::Precondition(
            "need at least one sample and two replicates".into(),
        ));
    }
    let n = q.dim();
    p.check_dim(n)?;
    let root = sqrt_psd(q);
    let estimates: Vec<Mat> = (0..replicates)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rng::stream(seed, rep as u64, 0, Channel::Sample);
            let z = rng::normal_matrix(&mut rng, n_samples, n);
            nystrom_sample_estimate(&(z * &root), p)
        })
        .collect::<Result<_>>()?;
    let k = replicates as f64;
    let mut sum = Mat::zeros(n, n);
    let mut sum_sq = Mat::zeros(n, n);
    for e in &estimates {
        sum += e;
        sum_sq += e.component_mul(e);
    }
    let mean = &sum / k;
    let var = (sum_sq - mean.component_mul(&mean) * k) / (k - 1.0);
    let stderr = var.map(|v| (v.max(0.0) / k).sqrt());
    Ok(NystromMc {
        replicates,
        samples: n_samples,
        mean: mat_to_rows(&mean),
        stderr: mat_to_rows(&stderr),
    })
}
