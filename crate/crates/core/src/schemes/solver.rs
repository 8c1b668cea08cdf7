use serde::Serialize;

use crate::error::{Error, Result};
use crate::matlib::{symmetrize, Mat, SpdMatrix};

use super::{decompose, recompose, AssociationScheme};

/// Roots `z1 <= z2` of `s z^2 - 2 a z - r`, the fixed points of
/// `alpha' = 2 a alpha + r - s alpha^2`. Requires `s > 0`.
///
/// The root of smaller magnitude is formed from the product `z1 z2 = -r/s` to
/// avoid cancellation.
pub fn scalar_roots(a: f64, r: f64, s: f64) -> (f64, f64) {
    let sq = (a * a + s * r).max(0.0).sqrt();
    if a >= 0.0 {
        let z2 = (a + sq) / s;
        let z1 = if a + sq > 0.0 { -r / (a + sq) } else { 0.0 };
        (z1, z2)
    } else {
        let z1 = (a - sq) / s;
        let z2 = r / (sq - a);
        (z1, z2)
    }
}

/// Closed-form solution of `alpha' = 2 a alpha + r - s alpha^2` from `alpha0`.
///
/// `s = 0` is the linear equation; `a^2 + s r = 0` the double root.
pub fn scalar_riccati(a: f64, r: f64, s: f64, alpha0: f64, t: f64) -> Result<f64> {
    if !(a.is_finite() && r.is_finite() && s.is_finite() && alpha0.is_finite() && t.is_finite()) {
        return Err(Error::NonFinite("scalar Riccati coefficients".into()));
    }
    if s < 0.0 || r < 0.0 {
        return Err(Error::Precondition(format!(
            "scalar Riccati needs r >= 0 and s >= 0, got r = {r}, s = {s}"
        )));
    }
    if s == 0.0 {
        return Ok(if a == 0.0 {
            alpha0 + r * t
        } else {
            let g = (2.0 * a * t).exp_m1();
            alpha0 + g * alpha0 + r * g / (2.0 * a)
        });
    }
    let disc = a * a + s * r;
    if disc == 0.0 {
        let z = a / s;
        let u0 = alpha0 - z;
        let den = 1.0 + s * u0 * t;
        if den <= 0.0 {
            return Err(Error::BlowUp {
                time: t,
                reason: "scalar Riccati escapes in finite time".into(),
            });
        }
        return Ok(z + u0 / den);
    }
    let sq = disc.sqrt();
    let (z1, z2) = scalar_roots(a, r, s);
    let d = 2.0 * sq / s;
    let e = (-2.0 * t * sq).exp();
    let u0 = alpha0 - z2;
    let den = (z2 - alpha0) * e + (alpha0 - z1);
    if den <= 0.0 {
        return Err(Error::BlowUp {
            time: t,
            reason: "scalar Riccati escapes in finite time".into(),
        });
    }
    Ok(z2 + u0 * d * e / den)
}

/// Spectral coefficients of `(A, R, S, P_0)` in a scheme's idempotent basis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeCoefficients {
    pub a: Vec<f64>,
    pub r: Vec<f64>,
    pub s: Vec<f64>,
    pub alpha0: Vec<f64>,
}

impl SchemeCoefficients {
    /// Decompose ring members `A, R, S, P_0`.
    pub fn from_matrices(
        scheme: &AssociationScheme,
        a: &Mat,
        r: &Mat,
        s: &Mat,
        p0: &Mat,
    ) -> Result<Self> {
        let out = Self {
            a: decompose(scheme, a)?,
            r: clamp_small(decompose(scheme, r)?, r.amax()),
            s: clamp_small(decompose(scheme, s)?, s.amax()),
            alpha0: decompose(scheme, p0)?,
        };
        if let Some(q) = (0..out.r.len()).find(|&q| out.r[q] < 0.0 || out.s[q] < 0.0) {
            return Err(Error::Precondition(format!(
                "idempotent {q} has r_q = {} and s_q = {}; both must be non-negative",
                out.r[q], out.s[q]
            )));
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// `alpha_q(t)` for every idempotent.
    pub fn alpha(&self, t: f64) -> Result<Vec<f64>> {
        (0..self.len())
            .map(|q| scalar_riccati(self.a[q], self.r[q], self.s[q], self.alpha0[q], t))
            .collect()
    }

    /// `z2(q)`, the limit of `alpha_q(t)`; infinite where `s_q = 0` and the
    /// linear equation is not stable.
    pub fn limits(&self) -> Vec<f64> {
        (0..self.len())
            .map(|q| {
                let (a, r, s) = (self.a[q], self.r[q], self.s[q]);
                if s > 0.0 {
                    scalar_roots(a, r, s).1
                } else if a < 0.0 {
                    -r / (2.0 * a)
                } else {
                    f64::INFINITY
                }
            })
            .collect()
    }

    /// Decay rates `2 sqrt(a_q^2 + s_q r_q)` of `alpha_q(t) - z2(q)`.
    pub fn decay_rates(&self) -> Vec<f64> {
        (0..self.len())
            .map(|q| 2.0 * (self.a[q].powi(2) + self.s[q] * self.r[q]).sqrt())
            .collect()
    }
}

/// Coefficients that are negative only through rounding are set to zero.
fn clamp_small(mut c: Vec<f64>, scale: f64) -> Vec<f64> {
    for v in c.iter_mut() {
        if *v < 0.0 && *v > -1e-12 * (1.0 + scale) {
            *v = 0.0;
        }
    }
    c
}

/// `P_t = sum_q alpha_q(t) D_q`.
pub fn scheme_riccati_closed_form(
    scheme: &AssociationScheme,
    coeffs: &SchemeCoefficients,
    t: f64,
) -> Result<SpdMatrix> {
    let alpha = coeffs.alpha(t)?;
    SpdMatrix::new(symmetrize(&recompose(scheme, &alpha)?))
}
