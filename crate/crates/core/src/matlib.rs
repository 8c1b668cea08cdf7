//! Matrix foundations shared by every other module.
//!
//! Dense `f64` matrices from `nalgebra` carry all data. [`SpdMatrix`] wraps a
//! matrix that has been checked to be symmetric positive semi-definite up to a
//! relative floor, so downstream code can rely on the invariant. Every spectral
//! quantity on symmetric inputs goes through one symmetric eigendecomposition.

use std::fmt::Write as _;
use std::ops::Deref;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Default relative PSD floor used by [`SpdMatrix::new`].
pub const DEFAULT_PSD_TOL: f64 = 1e-10;
/// Relative symmetry tolerance used when validating symmetric inputs.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Symmetric positive semi-definite matrix.
///
/// Invariants: square, finite, symmetric within [`SYMMETRY_TOL`] (stored exactly
/// symmetrized), and `lambda_min >= -psd_tolerance * (1 + lambda_max)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    inner: Mat,
    psd_tolerance: f64,
}

impl SpdMatrix {
    pub fn new(m: Mat) -> Result<Self> {
        Self::with_tolerance(m, DEFAULT_PSD_TOL)
    }

    pub fn with_tolerance(m: Mat, psd_tolerance: f64) -> Result<Self> {
        if psd_tolerance < 0.0 || !psd_tolerance.is_finite() {
            return Err(Error::Precondition(format!(
                "psd tolerance must be a nonnegative finite number, got {psd_tolerance}"
            )));
        }
        check_square(&m, "SpdMatrix")?;
        check_finite(&m, "SpdMatrix")?;
        let asym = asymmetry(&m);
        if asym > SYMMETRY_TOL {
            return Err(Error::Asymmetric { asymmetry: asym });
        }
        let sym = symmetrize(&m);
        let ev = eigenvalues_sym(&sym);
        let (lo, hi) = (ev[0], ev[ev.len() - 1]);
        let floor = -psd_tolerance * (1.0 + hi.max(0.0));
        if lo < floor {
            return Err(Error::NotPsd {
                lambda_min: lo,
                floor,
            });
        }
        Ok(Self {
            inner: sym,
            psd_tolerance,
        })
    }

    /// Identity of size `n`.
    pub fn identity(n: usize) -> Self {
        Self {
            inner: Mat::identity(n, n),
            psd_tolerance: DEFAULT_PSD_TOL,
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            inner: Mat::zeros(n, n),
            psd_tolerance: DEFAULT_PSD_TOL,
        }
    }

    /// Diagonal matrix; entries must be nonnegative.
    pub fn from_diagonal(d: &[f64]) -> Result<Self> {
        Self::new(Mat::from_diagonal(&Vector::from_column_slice(d)))
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn psd_tolerance(&self) -> f64 {
        self.psd_tolerance
    }

    pub fn as_mat(&self) -> &Mat {
        &self.inner
    }

    pub fn into_inner(self) -> Mat {
        self.inner
    }

    /// Smallest eigenvalue.
    pub fn lambda_min(&self) -> f64 {
        lambda_min(&self.inner)
    }

    pub fn lambda_max(&self) -> f64 {
        lambda_max(&self.inner)
    }

    /// Strict positive definiteness (`lambda_min > 0`).
    pub fn require_pd(&self) -> Result<()> {
        let lo = self.lambda_min();
        if lo > 0.0 {
            Ok(())
        } else {
            Err(Error::NotPd { lambda_min: lo })
        }
    }
}

impl Deref for SpdMatrix {
    type Target = Mat;

    fn deref(&self) -> &Mat {
        &self.inner
    }
}

impl AsRef<Mat> for SpdMatrix {
    fn as_ref(&self) -> &Mat {
        &self.inner
    }
}

pub(crate) fn check_square(m: &Mat, what: &str) -> Result<()> {
    if m.nrows() == 0 || m.nrows() != m.ncols() {
        return Err(Error::dims(format!(
            "{what}: expected a nonempty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

pub(crate) fn check_same_shape(a: &Mat, b: &Mat, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::dims(format!(
            "{what}: {}x{} vs {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(())
}

pub(crate) fn check_finite(m: &Mat, what: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

/// Max-entry asymmetry relative to `max(1, max |a_ij|)`.
pub fn asymmetry(m: &Mat) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    let scale = m.amax().max(1.0);
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst / scale
}

pub(crate) fn check_symmetric(m: &Mat, what: &str) -> Result<()> {
    check_square(m, what)?;
    let asym = asymmetry(m);
    if asym > SYMMETRY_TOL {
        return Err(Error::Asymmetric { asymmetry: asym });
    }
    Ok(())
}

/// `(A + A^T) / 2`.
pub fn symmetrize(a: &Mat) -> Mat {
    (a + a.transpose()) * 0.5
}

/// Eigendecomposition of the symmetric part, eigenvalues ascending.
pub fn eigh(a: &Mat) -> (Vector, Mat) {
    let eig = SymmetricEigen::new(symmetrize(a));
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = Vector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = Mat::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// Eigenvalues of the symmetric part, ascending.
pub fn eigenvalues_sym(a: &Mat) -> Vector {
    let mut v: Vec<f64> = SymmetricEigen::new(symmetrize(a))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    v.sort_by(f64::total_cmp);
    Vector::from_vec(v)
}

pub fn lambda_min(a: &Mat) -> f64 {
    eigenvalues_sym(a)[0]
}

pub fn lambda_max(a: &Mat) -> f64 {
    let ev = eigenvalues_sym(a);
    ev[ev.len() - 1]
}

/// Rebuild `V f(diag) V^T` from an ascending eigendecomposition.
pub(crate) fn spectral_map(values: &Vector, vectors: &Mat, f: impl Fn(f64) -> f64) -> Mat {
    let d = Vector::from_iterator(values.len(), values.iter().map(|&x| f(x)));
    let scaled = vectors * Mat::from_diagonal(&d);
    symmetrize(&(scaled * vectors.transpose()))
}

/// Logarithmic norm: largest eigenvalue of the symmetric part.
pub fn log_norm(a: &Mat) -> f64 {
    lambda_max(&symmetrize(a))
}

/// Largest real part over the spectrum.
pub fn spectral_abscissa(a: &Mat) -> f64 {
    a.clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Operator 2-norm (largest singular value).
pub fn norm2(a: &Mat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    if a.nrows() == a.ncols() && asymmetry(a) == 0.0 {
        let ev = eigenvalues_sym(a);
        return ev[0].abs().max(ev[ev.len() - 1].abs());
    }
    a.singular_values().max()
}

pub fn norm_fro(a: &Mat) -> f64 {
    a.norm()
}

/// Entrywise (Hadamard-Schur) product.
pub fn hadamard(a: &Mat, b: &Mat) -> Result<Mat> {
    check_same_shape(a, b, "hadamard")?;
    Ok(a.component_mul(b))
}

/// Principal square root of a PSD matrix.
///
/// Eigenvalues inside the validation floor are clipped at zero.
pub fn sqrt_spd(q: &SpdMatrix) -> SpdMatrix {
    let (vals, vecs) = eigh(q);
    SpdMatrix {
        inner: spectral_map(&vals, &vecs, |x| x.max(0.0).sqrt()),
        psd_tolerance: q.psd_tolerance,
    }
}

/// Principal square root of a symmetric matrix with negative eigenvalues
/// clipped to zero. Used internally where the argument is PSD up to roundoff.
pub(crate) fn sqrt_psd(m: &Mat) -> Mat {
    let (vals, vecs) = eigh(m);
    spectral_map(&vals, &vecs, |x| x.max(0.0).sqrt())
}

/// Loewner order test `A >= B` with a relative tolerance.
pub fn loewner_geq(a: &Mat, b: &Mat, tol: f64) -> Result<bool> {
    Ok(loewner_margin(a, b, tol)? >= 0.0)
}

/// `lambda_min(A - B) + tol * (1 + |A|_2 + |B|_2)`; nonnegative iff `A >= B`
/// at the given tolerance. The magnitude grades how badly the order fails.
pub fn loewner_margin(a: &Mat, b: &Mat, tol: f64) -> Result<f64> {
    check_symmetric(a, "loewner_geq lhs")?;
    check_symmetric(b, "loewner_geq rhs")?;
    check_same_shape(a, b, "loewner_geq")?;
    let gap = lambda_min(&(a - b));
    Ok(gap + tol * (1.0 + norm2(a) + norm2(b)))
}

/// Eigen-clipped Moore-Penrose pseudo-inverse of a PSD matrix.
pub fn pinv_spd(q: &SpdMatrix, rel_tol: f64) -> SpdMatrix {
    SpdMatrix {
        inner: pinv_sym(q, rel_tol),
        psd_tolerance: q.psd_tolerance,
    }
}

pub(crate) fn pinv_sym(q: &Mat, rel_tol: f64) -> Mat {
    let (vals, vecs) = eigh(q);
    let top = vals.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let cut = rel_tol * top;
    spectral_map(&vals, &vecs, |x| if top > 0.0 && x > cut { 1.0 / x } else { 0.0 })
}

/// Inverse of a strictly positive definite matrix.
pub fn inv_pd(q: &Mat) -> Result<Mat> {
    let (vals, vecs) = eigh(q);
    if vals[0] <= 0.0 {
        return Err(Error::NotPd { lambda_min: vals[0] });
    }
    Ok(spectral_map(&vals, &vecs, |x| 1.0 / x))
}

/// Numerical rank from singular values relative to the largest one.
pub fn numerical_rank(m: &Mat, rel_tol: f64) -> (usize, f64) {
    if m.is_empty() {
        return (0, 0.0);
    }
    let sv = m.clone().singular_values();
    let top = sv.max();
    if top == 0.0 {
        return (0, 0.0);
    }
    let kept: Vec<f64> = sv.iter().copied().filter(|&s| s > rel_tol * top).collect();
    let smallest = kept.iter().copied().fold(f64::INFINITY, f64::min);
    (kept.len(), if kept.is_empty() { 0.0 } else { smallest })
}

/// Parse the matrix text format: a `rows cols` header followed by one
/// whitespace-separated row per line. Blank lines and `#` comments are skipped.
pub fn parse_matrix(text: &str, origin: &Path) -> Result<Mat> {
    let perr = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines
        .next()
        .ok_or_else(|| perr(1, "missing `rows cols` header".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| perr(hline, format!("bad header: {e}")))?;
    let [rows, cols] = dims[..] else {
        return Err(perr(hline, format!("header needs 2 integers, got {}", dims.len())));
    };
    let mut m = Mat::zeros(rows, cols);
    for i in 0..rows {
        let (ln, row) = lines
            .next()
            .ok_or_else(|| perr(hline + i + 1, format!("expected {rows} rows, found {i}")))?;
        let vals: Vec<f64> = row
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| perr(ln, format!("bad number: {e}")))?;
        if vals.len() != cols {
            return Err(perr(ln, format!("expected {cols} values, found {}", vals.len())));
        }
        for (j, v) in vals.into_iter().enumerate() {
            if !v.is_finite() {
                return Err(perr(ln, "non-finite value".into()));
            }
            m[(i, j)] = v;
        }
    }
    if let Some((ln, _)) = lines.next() {
        return Err(perr(ln, format!("trailing data after {rows} rows")));
    }
    Ok(m)
}

pub fn read_matrix(path: &Path) -> Result<Mat> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_matrix(&text, path)
}

/// Render in the matrix text format with 17 significant digits.
pub fn format_matrix(m: &Mat) -> String {
    let mut out = format!("{} {}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.16e}", m[(i, j)])).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

pub fn write_matrix(path: &Path, m: &Mat) -> Result<()> {
    std::fs::write(path, format_matrix(m))
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}
