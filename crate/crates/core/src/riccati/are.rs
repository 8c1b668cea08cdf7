use crate::error::{Error, Result};
use crate::matlib::{check_square, check_symmetric, spectral_abscissa, symmetrize, Mat, SpdMatrix};

use super::drift::{ricc_raw, DriftVariant};
use super::flow::flow_to;
use super::model::{characteristic_time, FilterModel, Triplet};

/// Warm-start horizon in characteristic times.
const WARM_START_TIMES: f64 = 50.0;
/// Warm-start RK4 step in characteristic times.
const WARM_START_STEP: f64 = 0.01;
const MAX_NEWTON: usize = 30;

/// Solve `F' X + X F = -W` by Kronecker vectorization.
///
/// `F` is expected Hurwitz; the solve only fails when `F` and `-F` share an
/// eigenvalue (singular Kronecker sum).
pub fn lyapunov_solve(f: &Mat, w: &Mat) -> Result<Mat> {
    check_square(f, "F")?;
    check_symmetric(w, "W")?;
    let n = f.nrows();
    if w.nrows() != n {
        return Err(Error::dims("F and W dimensions differ"));
    }
    let id = Mat::identity(n, n);
    let ft = f.transpose();
    // vec(F'X) = (I (x) F') vec X, vec(XF) = (F' (x) I) vec X (column-major)
    let k = id.kronecker(&ft) + ft.kronecker(&id);
    let rhs = -Mat::from_column_slice(n * n, 1, w.as_slice());
    let lu = k.clone().lu();
    let mut x = lu.solve(&rhs).ok_or(Error::SingularLyapunov)?;
    // one step of iterative refinement
    let resid = &rhs - &k * &x;
    if let Some(dx) = lu.solve(&resid) {
        x += dx;
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularLyapunov);
    }
    let x = symmetrize(&Mat::from_column_slice(n, n, x.as_slice()));
    let residual = (f.transpose() * &x + &x * f + w).norm();
    if residual > 1e-8 * (1.0 + w.norm()) {
        return Err(Error::SingularLyapunov);
    }
    Ok(x)
}

/// Positive definite stabilizing solution of `AP + PA' - PSP + R = 0` for the
/// nominal triplet or the one carried by the variant.
///
/// A long flow from `Q = 0` gives the warm start; Newton-Kleinman steps then
/// solve `(A - P_k S) X + X (A - P_k S)' = -(R + P_k S P_k)`.
pub fn are_solve(model: &FilterModel, variant: &DriftVariant, tol: f64) -> Result<SpdMatrix> {
    let triplet = match variant {
        DriftVariant::Perturbed(_) => {
            return Err(Error::Unsupported(
                "ARE for a perturbed drift; use the induced triplet".into(),
            ))
        }
        other => {
            other.validate(model)?;
            other.effective_triplet(model).expect("non-perturbed variant")
        }
    };
    are_solve_triplet(&triplet, tol)
}

pub fn are_solve_triplet(t: &Triplet, tol: f64) -> Result<SpdMatrix> {
    t.validate()?;
    let n = t.dim();
    let tau = characteristic_time(&t.a, &t.r, &t.s, &Mat::zeros(n, n));
    let helper = FilterModel::from_triplet(t.a.clone(), t.r.clone(), t.s.clone())?;
    let warm = flow_to(
        &helper,
        &DriftVariant::Triplet(t.clone()),
        &Mat::zeros(n, n),
        WARM_START_TIMES * tau,
        WARM_START_STEP * tau,
    );
    // a failed warm start falls back to a large multiple of the identity
    let mut p = warm.unwrap_or_else(|_| Mat::identity(n, n) * (1.0 / tau));
    let target = tol * t.r.norm();
    let mut residual = ricc_raw(&t.a, &t.r, &t.s, &p).norm();
    let mut iterations = 0;
    while residual > target && iterations < MAX_NEWTON {
        iterations += 1;
        let f = &t.a - &p * &t.s;
        let w = symmetrize(&(&t.r + &p * &t.s * &p));
        let next = match lyapunov_solve(&f.transpose(), &w) {
            Ok(x) => x,
            Err(_) => break,
        };
        let next_res = ricc_raw(&t.a, &t.r, &t.s, &next).norm();
        if !next_res.is_finite() {
            break;
        }
        p = next;
        residual = next_res;
    }
    if residual > target {
        return Err(Error::NoConvergence {
            iterations,
            residual,
        });
    }
    let abscissa = spectral_abscissa(&(&t.a - &p * &t.s));
    if abscissa >= 0.0 {
        return Err(Error::NotHurwitz { abscissa });
    }
    let out = SpdMatrix::new(p)?;
    out.require_pd()?;
    Ok(out)
}
