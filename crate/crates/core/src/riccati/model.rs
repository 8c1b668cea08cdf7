use std::path::Path;

use crate::error::{Error, Result};
use crate::matlib::{
    self, check_finite, check_square, check_symmetric, inv_pd, sqrt_psd, symmetrize, Mat,
    SpdMatrix, Vector,
};

/// Linear-Gaussian signal/observation model.
///
/// `dX = A X dt + R^{1/2} dW`, `dY = C X dt + Sigma^{1/2} dV`, with
/// `X_0 ~ N(x0_mean, P0)`. `S = C^T Sigma^{-1} C` is derived on construction.
///
/// Construction only enforces the covariance invariants (R and Sigma strictly
/// positive definite, P0 PSD). Controllability and observability are reported
/// by [`super::check_rank_conditions`] and required by the operations that
/// depend on them (ARE, Gramians).
#[derive(Debug, Clone)]
pub struct FilterModel {
    a: Mat,
    r: SpdMatrix,
    c: Mat,
    sigma: SpdMatrix,
    s: SpdMatrix,
    x0_mean: Vector,
    p0: SpdMatrix,
    r_sqrt: Mat,
    sigma_sqrt: Mat,
    sigma_inv: Mat,
}

impl FilterModel {
    pub fn new(a: Mat, r: Mat, c: Mat, sigma: Mat, x0_mean: Vector, p0: Mat) -> Result<Self> {
        check_square(&a, "A")?;
        check_finite(&a, "A")?;
        let n = a.nrows();
        let r = SpdMatrix::new(r)?;
        let sigma = SpdMatrix::new(sigma)?;
        let p0 = SpdMatrix::new(p0)?;
        if r.dim() != n || p0.dim() != n || x0_mean.len() != n {
            return Err(Error::dims(format!(
                "model of dimension {n}: R is {0}x{0}, P0 is {1}x{1}, x0 has {2} entries",
                r.dim(),
                p0.dim(),
                x0_mean.len()
            )));
        }
        if c.ncols() != n || c.nrows() != sigma.dim() {
            return Err(Error::dims(format!(
                "C is {}x{}, expected {}x{n}",
                c.nrows(),
                c.ncols(),
                sigma.dim()
            )));
        }
        check_finite(&c, "C")?;
        r.require_pd()?;
        sigma.require_pd()?;
        let sigma_inv = inv_pd(&sigma)?;
        let s = SpdMatrix::new(symmetrize(&(c.transpose() * &sigma_inv * &c)))?;
        Ok(Self {
            r_sqrt: sqrt_psd(&r),
            sigma_sqrt: sqrt_psd(&sigma),
            a,
            r,
            c,
            sigma,
            s,
            x0_mean,
            p0,
            sigma_inv,
        })
    }

    /// Model with `C = S^{1/2}`, `Sigma = Id`, zero initial mean and `P0 = Id`,
    /// for experiments that only involve the Riccati triplet `(A, R, S)`.
    pub fn from_triplet(a: Mat, r: Mat, s: Mat) -> Result<Self> {
        check_symmetric(&s, "S")?;
        let n = a.nrows();
        let c = sqrt_psd(SpdMatrix::new(s)?.as_mat());
        Self::new(
            a,
            r,
            c,
            Mat::identity(n, n),
            Vector::zeros(n),
            Mat::identity(n, n),
        )
    }

    /// Same model with a different initial law.
    pub fn with_initial(&self, x0_mean: Vector, p0: Mat) -> Result<Self> {
        Self::new(
            self.a.clone(),
            self.r.as_mat().clone(),
            self.c.clone(),
            self.sigma.as_mat().clone(),
            x0_mean,
            p0,
        )
    }

    /// Load from matrix files named in a config section.
    pub fn from_files(
        a: &Path,
        r: &Path,
        c: &Path,
        sigma: &Path,
        x0_mean: &Path,
        p0: &Path,
    ) -> Result<Self> {
        let x0 = matlib::read_matrix(x0_mean)?;
        if x0.ncols() != 1 && x0.nrows() != 1 {
            return Err(Error::Parse {
                path: x0_mean.to_path_buf(),
                line: 1,
                message: format!("x0_mean must be a vector, got {}x{}", x0.nrows(), x0.ncols()),
            });
        }
        let x0 = Vector::from_iterator(x0.len(), x0.iter().copied());
        Self::new(
            matlib::read_matrix(a)?,
            matlib::read_matrix(r)?,
            matlib::read_matrix(c)?,
            matlib::read_matrix(sigma)?,
            x0,
            matlib::read_matrix(p0)?,
        )
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn obs_dim(&self) -> usize {
        self.c.nrows()
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }

    pub fn r(&self) -> &SpdMatrix {
        &self.r
    }

    pub fn c(&self) -> &Mat {
        &self.c
    }

    pub fn sigma(&self) -> &SpdMatrix {
        &self.sigma
    }

    pub fn s(&self) -> &SpdMatrix {
        &self.s
    }

    pub fn x0_mean(&self) -> &Vector {
        &self.x0_mean
    }

    pub fn p0(&self) -> &SpdMatrix {
        &self.p0
    }

    pub fn r_sqrt(&self) -> &Mat {
        &self.r_sqrt
    }

    pub fn sigma_sqrt(&self) -> &Mat {
        &self.sigma_sqrt
    }

    pub fn sigma_inv(&self) -> &Mat {
        &self.sigma_inv
    }

    /// `(A, R, S)`.
    pub fn triplet(&self) -> Triplet {
        Triplet {
            a: self.a.clone(),
            r: self.r.as_mat().clone(),
            s: self.s.as_mat().clone(),
        }
    }

    /// Time scale used for default integrator steps.
    ///
    /// `1 / max(1, |A|_2, |S|_2 * p)` with `p` the larger of `|P0|_2` and the
    /// scalar steady-state proxy `sqrt(|R|_2 / |S|_2)`.
    pub fn characteristic_time(&self) -> f64 {
        characteristic_time(&self.a, self.r.as_mat(), self.s.as_mat(), self.p0.as_mat())
    }

    /// `1e-3` characteristic times.
    pub fn default_step(&self) -> f64 {
        1e-3 * self.characteristic_time()
    }
}

pub(crate) fn characteristic_time(a: &Mat, r: &Mat, s: &Mat, p0: &Mat) -> f64 {
    let sn = matlib::norm2(s);
    let proxy = if sn > 0.0 {
        (matlib::norm2(r) / sn).sqrt()
    } else {
        0.0
    };
    let p = matlib::norm2(p0).max(proxy);
    1.0 / 1f64.max(matlib::norm2(a)).max(sn * p)
}

/// Riccati triplet `(A, R, S)`: drift, signal covariance rate, and the
/// quadratic coefficient. `R` must be PD and `S` PSD.
#[derive(Debug, Clone, PartialEq)]
pub struct Triplet {
    pub a: Mat,
    pub r: Mat,
    pub s: Mat,
}

impl Triplet {
    pub fn new(a: Mat, r: Mat, s: Mat) -> Result<Self> {
        let t = Self { a, r, s };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        check_square(&self.a, "A_pi")?;
        let n = self.a.nrows();
        if self.r.shape() != (n, n) || self.s.shape() != (n, n) {
            return Err(Error::dims("triplet blocks must share the dimension of A"));
        }
        check_symmetric(&self.r, "R_pi")?;
        check_symmetric(&self.s, "S_pi")?;
        SpdMatrix::new(self.r.clone())?.require_pd()?;
        SpdMatrix::new(self.s.clone())?;
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }
}
