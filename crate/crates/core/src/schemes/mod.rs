//! Association schemes and their Bose-Mesner algebras.
//!
//! A scheme is a symmetric partition of the index pairs `I x I` whose
//! adjacency matrices `B_0 = Id, B_1, ..., B_n` span a commutative algebra
//! closed under ordinary and Hadamard products. The algebra has a second basis
//! of minimal orthogonal idempotents `D_q`, the common eigenprojectors of the
//! `B_q`. When `(A, R, S)` and the initial covariance lie in the algebra the
//! Riccati flow decouples into scalar equations, one per idempotent, solved in
//! closed form by [`scheme_riccati_closed_form`].

mod block;
mod construct;
mod idempotent;
mod solver;

pub use block::BlockRing;
pub use construct::{cycle_adjacency, path_adjacency};
pub use idempotent::{idempotents, IdempotentBasis};
pub use solver::{scalar_riccati, scalar_roots, scheme_riccati_closed_form, SchemeCoefficients};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matlib::{check_square, Mat};

/// Validated association scheme with its idempotent basis.
#[derive(Debug, Clone)]
pub struct AssociationScheme {
    /// `classes[i][j]` is the class index of the pair `(i, j)`.
    classes: Vec<Vec<usize>>,
    adjacency: Vec<Mat>,
    valencies: Vec<usize>,
    /// `w[q][q1][q2]`: number of `k` with `(i,k)` in class `q1` and `(k,j)` in
    /// class `q2`, for any `(i,j)` in class `q`.
    structural_constants: Vec<Vec<Vec<i64>>>,
    idempotents: Vec<Mat>,
    /// `eigen_table[k][q] = lambda_k(B_q)`.
    eigen_table: Vec<Vec<f64>>,
}

/// Shape summary for reports.
#[derive(Debug, Clone, Serialize)]
pub struct SchemeSummary {
    pub points: usize,
    pub classes: usize,
    pub idempotents: usize,
    pub valencies: Vec<usize>,
    pub idempotent_ranks: Vec<usize>,
}

impl AssociationScheme {
    /// Number of points `r`.
    pub fn points(&self) -> usize {
        self.classes.len()
    }

    /// Number of non-diagonal classes `n` (the basis has `n + 1` elements).
    pub fn class_count(&self) -> usize {
        self.adjacency.len() - 1
    }

    /// Number of minimal idempotents found numerically.
    pub fn idempotent_count(&self) -> usize {
        self.idempotents.len()
    }

    pub fn class_of(&self, i: usize, j: usize) -> usize {
        self.classes[i][j]
    }

    pub fn class_matrix(&self) -> &[Vec<usize>] {
        &self.classes
    }

    pub fn adjacency(&self) -> &[Mat] {
        &self.adjacency
    }

    pub fn valencies(&self) -> &[usize] {
        &self.valencies
    }

    /// `w^q_{q1,q2}`.
    pub fn structural_constant(&self, q: usize, q1: usize, q2: usize) -> i64 {
        self.structural_constants[q][q1][q2]
    }

    pub fn idempotent_basis(&self) -> &[Mat] {
        &self.idempotents
    }

    pub fn eigen_table(&self) -> &[Vec<f64>] {
        &self.eigen_table
    }

    pub fn summary(&self) -> SchemeSummary {
        SchemeSummary {
            points: self.points(),
            classes: self.class_count(),
            idempotents: self.idempotent_count(),
            valencies: self.valencies.clone(),
            idempotent_ranks: self
                .idempotents
                .iter()
                .map(|d| d.trace().round() as usize)
                .collect(),
        }
    }

    /// Recompute the idempotent basis with a different grouping tolerance.
    pub fn with_idempotent_tolerance(mut self, tol: f64) -> Result<Self> {
        let basis = idempotents(&self, tol)?;
        self.idempotents = basis.projectors;
        self.eigen_table = basis.eigen_table;
        Ok(self)
    }

    fn check_dims(&self, q: &Mat) -> Result<()> {
        check_square(q, "scheme operand")?;
        if q.nrows() != self.points() {
            return Err(Error::dims(format!(
                "matrix is {0}x{0}, scheme has {1} points",
                q.nrows(),
                self.points()
            )));
        }
        Ok(())
    }

    /// Mean of the entries of `q` over each class.
    fn class_means(&self, q: &Mat) -> Vec<f64> {
        let mut sums = vec![0.0; self.adjacency.len()];
        for (i, row) in self.classes.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                sums[c] += q[(i, j)];
            }
        }
        let r = self.points();
        sums.iter()
            .zip(&self.valencies)
            .map(|(s, &v)| s / (r * v) as f64)
            .collect()
    }

    fn from_class_values(&self, vals: &[f64]) -> Mat {
        let r = self.points();
        Mat::from_fn(r, r, |i, j| vals[self.classes[i][j]])
    }
}

/// Frobenius-orthogonal projection onto the Bose-Mesner algebra:
/// `sum_q <Q, B_q>_F / <B_q, B_q>_F B_q`, i.e. class-wise averaging.
pub fn project(scheme: &AssociationScheme, q: &Mat) -> Result<Mat> {
    scheme.check_dims(q)?;
    Ok(scheme.from_class_values(&scheme.class_means(q)))
}

/// The same projection written in the idempotent basis:
/// `sum_q <Q, D_q>_F / <D_q, D_q>_F D_q`.
pub fn project_idempotent(scheme: &AssociationScheme, q: &Mat) -> Result<Mat> {
    scheme.check_dims(q)?;
    let r = scheme.points();
    let mut out = Mat::zeros(r, r);
    for d in &scheme.idempotents {
        out += d * (q.dot(d) / d.dot(d));
    }
    Ok(out)
}

/// Whether `q` is constant over each class, within `tol * max(1, max|q_ij|)`.
pub fn membership(scheme: &AssociationScheme, q: &Mat, tol: f64) -> bool {
    if scheme.check_dims(q).is_err() {
        return false;
    }
    membership_deviation(scheme, q) <= tol * q.amax().max(1.0)
}

/// Largest deviation of an entry from its class mean.
pub fn membership_deviation(scheme: &AssociationScheme, q: &Mat) -> f64 {
    let means = scheme.class_means(q);
    let mut worst = 0.0_f64;
    for (i, row) in scheme.classes.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            worst = worst.max((q[(i, j)] - means[c]).abs());
        }
    }
    worst
}

/// Relative tolerance used by [`decompose`] to accept ring members.
pub const DECOMPOSE_TOL: f64 = 1e-8;

/// Coefficients of a ring member in the idempotent basis,
/// `c_q = <Q, D_q>_F / <D_q, D_q>_F`, so that `Q = sum_q c_q D_q`.
pub fn decompose(scheme: &AssociationScheme, q: &Mat) -> Result<Vec<f64>> {
    scheme.check_dims(q)?;
    let dev = membership_deviation(scheme, q);
    if dev > DECOMPOSE_TOL * q.amax().max(1.0) {
        return Err(Error::NotAMember { deviation: dev });
    }
    Ok(scheme
        .idempotents
        .iter()
        .map(|d| q.dot(d) / d.dot(d))
        .collect())
}

/// `sum_q c_q D_q`.
pub fn recompose(scheme: &AssociationScheme, coeffs: &[f64]) -> Result<Mat> {
    if coeffs.len() != scheme.idempotent_count() {
        return Err(Error::dims(format!(
            "{} coefficients for {} idempotents",
            coeffs.len(),
            scheme.idempotent_count()
        )));
    }
    let r = scheme.points();
    Ok(scheme
        .idempotents
        .iter()
        .zip(coeffs)
        .fold(Mat::zeros(r, r), |acc, (d, c)| acc + d * *c))
}

#[cfg(test)]
mod tests;
