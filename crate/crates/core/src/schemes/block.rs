use crate::error::{Error, Result};
use crate::matlib::{check_square, Mat};

/// Ring of block-diagonal matrices `{L (.) Q}` for `L = diag(J_1, ..., J_n)`.
///
/// Closed under products but without the all-ones element, so not a scheme;
/// its projection is the Hadamard mask.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockRing {
    /// `labels[i]` is the block of index `i`.
    labels: Vec<usize>,
    n_blocks: usize,
}

impl BlockRing {
    /// Contiguous blocks of the given sizes.
    pub fn contiguous(sizes: &[usize]) -> Result<Self> {
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::Precondition("block sizes must be positive".into()));
        }
        let labels = sizes
            .iter()
            .enumerate()
            .flat_map(|(b, &n)| std::iter::repeat(b).take(n))
            .collect();
        Ok(Self {
            labels,
            n_blocks: sizes.len(),
        })
    }

    /// Arbitrary blocks given by a label per index; labels must be `0..n`.
    pub fn from_labels(labels: Vec<usize>) -> Result<Self> {
        let n_blocks = labels.iter().max().map_or(0, |m| m + 1);
        if labels.is_empty() || (0..n_blocks).any(|b| !labels.contains(&b)) {
            return Err(Error::Precondition("block labels must cover 0..n".into()));
        }
        Ok(Self { labels, n_blocks })
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn block_count(&self) -> usize {
        self.n_blocks
    }

    /// Largest block size `r*`.
    pub fn max_block(&self) -> usize {
        (0..self.n_blocks)
            .map(|b| self.labels.iter().filter(|&&l| l == b).count())
            .max()
            .unwrap_or(0)
    }

    pub fn block_indices(&self, b: usize) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.labels[i] == b).collect()
    }

    /// The 0/1 mask `L`.
    pub fn mask(&self) -> Mat {
        let r = self.dim();
        Mat::from_fn(r, r, |i, j| {
            if self.labels[i] == self.labels[j] {
                1.0
            } else {
                0.0
            }
        })
    }

    fn check(&self, q: &Mat) -> Result<()> {
        check_square(q, "block ring operand")?;
        if q.nrows() != self.dim() {
            return Err(Error::dims(format!(
                "matrix is {0}x{0}, ring has dimension {1}",
                q.nrows(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// `L (.) Q`.
    pub fn project(&self, q: &Mat) -> Result<Mat> {
        self.check(q)?;
        Ok(q.component_mul(&self.mask()))
    }

    /// Whether all cross-block entries vanish within `tol * max(1, max|q_ij|)`.
    pub fn membership(&self, q: &Mat, tol: f64) -> bool {
        if self.check(q).is_err() {
            return false;
        }
        let lim = tol * q.amax().max(1.0);
        let r = self.dim();
        (0..r).all(|i| (0..r).all(|j| self.labels[i] == self.labels[j] || q[(i, j)].abs() <= lim))
    }

    /// Diagonal blocks of a ring member.
    pub fn decompose(&self, q: &Mat) -> Result<Vec<Mat>> {
        self.check(q)?;
        if !self.membership(q, super::DECOMPOSE_TOL) {
            let dev = (q - q.component_mul(&self.mask())).amax();
            return Err(Error::NotAMember { deviation: dev });
        }
        Ok((0..self.n_blocks)
            .map(|b| q.select_rows(&self.block_indices(b)).select_columns(&self.block_indices(b)))
            .collect())
    }
}
