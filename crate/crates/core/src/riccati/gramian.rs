use serde::Serialize;

use crate::error::{Error, Result};
use crate::matlib::{self, inv_pd, symmetrize, Mat, SpdMatrix};

use super::flow::time_grid;
use super::model::{FilterModel, Triplet};

/// Extremal eigenvalues of a Gramian, `lo Id <= G <= hi Id`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    fn of(m: &Mat) -> Self {
        let ev = matlib::eigenvalues_sym(m);
        Self {
            lo: ev[0],
            hi: ev[ev.len() - 1],
        }
    }
}

/// Observability/controllability Gramians over the interval `[0, v]`.
#[derive(Debug, Clone)]
pub struct GramianSet {
    pub v: f64,
    /// `int_0^v e^{-A's} S e^{-As} ds`
    pub o_v: SpdMatrix,
    /// `int_0^v e^{As} R e^{A's} ds`
    pub c_v: SpdMatrix,
    /// `O_v^{-1} [int_0^v e^{-(v-s)A'} O_s R O_s e^{-(v-s)A} ds] O_v^{-1}`
    pub c_v_of_o: SpdMatrix,
    /// `C_v^{-1} [int_0^v e^{(v-s)A} C_s S C_s e^{(v-s)A'} ds] C_v^{-1}`
    pub o_v_of_c: SpdMatrix,
    pub o_bounds: Bounds,
    pub c_bounds: Bounds,
    pub c_of_o_bounds: Bounds,
    pub o_of_c_bounds: Bounds,
}

impl GramianSet {
    /// `lambda_max(O_v(C)) + 1 / lambda_min(C_v)`: bounds `|phi_t(Q)^{-1}|_2`
    /// for `t >= v`.
    pub fn inverse_flow_bound(&self) -> f64 {
        self.o_of_c_bounds.hi + 1.0 / self.c_bounds.lo
    }

    /// `lambda_max(C_v(O)) + 1 / lambda_min(O_v)`: bounds `|phi_t(Q)|_2`
    /// for `t >= v`.
    pub fn flow_bound(&self) -> f64 {
        self.c_of_o_bounds.hi + 1.0 / self.o_bounds.lo
    }
}

/// State of the Gramian ODE system: `M = e^{-At}`, `N = e^{At}`, the two
/// Gramians, and the inner integrals of the sandwiched Gramians.
struct GramState {
    m: Mat,
    n: Mat,
    o: Mat,
    c: Mat,
    k: Mat,
    l: Mat,
}

impl GramState {
    fn deriv(&self, t: &Triplet) -> GramState {
        let at = t.a.transpose();
        GramState {
            m: -(&t.a * &self.m),
            n: &t.a * &self.n,
            o: self.m.transpose() * &t.s * &self.m,
            c: &self.n * &t.r * self.n.transpose(),
            k: &self.o * &t.r * &self.o - &at * &self.k - &self.k * &t.a,
            l: &self.c * &t.s * &self.c + &t.a * &self.l + &self.l * &at,
        }
    }

    fn axpy(&self, h: f64, d: &GramState) -> GramState {
        GramState {
            m: &self.m + &d.m * h,
            n: &self.n + &d.n * h,
            o: &self.o + &d.o * h,
            c: &self.c + &d.c * h,
            k: &self.k + &d.k * h,
            l: &self.l + &d.l * h,
        }
    }
}

fn sandwich(inv: &Mat, inner: &Mat) -> Mat {
    symmetrize(&(inv * inner * inv))
}

fn pd_or(name: &'static str, m: &Mat) -> Result<SpdMatrix> {
    let spd = SpdMatrix::new(symmetrize(m))?;
    let b = Bounds::of(m);
    if b.lo <= 1e-12 * b.hi.max(f64::MIN_POSITIVE) {
        return Err(Error::SingularGramian {
            name,
            lambda_min: b.lo,
        });
    }
    Ok(spd)
}

/// The four Gramians on `[0, v]`, by RK4 quadrature of their defining ODEs.
pub fn gramians(triplet: &Triplet, v: f64, step: f64) -> Result<GramianSet> {
    triplet.validate()?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::Precondition(format!("v must be positive, got {v}")));
    }
    if !(step > 0.0) {
        return Err(Error::Precondition(format!("step must be positive, got {step}")));
    }
    let n = triplet.dim();
    let z = || Mat::zeros(n, n);
    let mut y = GramState {
        m: Mat::identity(n, n),
        n: Mat::identity(n, n),
        o: z(),
        c: z(),
        k: z(),
        l: z(),
    };
    for w in time_grid(v, step).windows(2) {
        let h = w[1] - w[0];
        let k1 = y.deriv(triplet);
        let k2 = y.axpy(h / 2.0, &k1).deriv(triplet);
        let k3 = y.axpy(h / 2.0, &k2).deriv(triplet);
        let k4 = y.axpy(h, &k3).deriv(triplet);
        y = y
            .axpy(h / 6.0, &k1)
            .axpy(h / 3.0, &k2)
            .axpy(h / 3.0, &k3)
            .axpy(h / 6.0, &k4);
    }
    let o_v = pd_or("O_v", &y.o)?;
    let c_v = pd_or("C_v", &y.c)?;
    let c_v_of_o = pd_or("C_v(O)", &sandwich(&inv_pd(&o_v)?, &y.k))?;
    let o_v_of_c = pd_or("O_v(C)", &sandwich(&inv_pd(&c_v)?, &y.l))?;
    Ok(GramianSet {
        v,
        o_bounds: Bounds::of(&o_v),
        c_bounds: Bounds::of(&c_v),
        c_of_o_bounds: Bounds::of(&c_v_of_o),
        o_of_c_bounds: Bounds::of(&o_v_of_c),
        o_v,
        c_v,
        c_v_of_o,
        o_v_of_c,
    })
}

/// Uniform bounds valid for `t >= v`:
/// `(O_v(C) + C_v^{-1})^{-1} <= phi_t(Q) <= O_v^{-1} + C_v(O)`.
pub fn steady_bounds(model: &FilterModel, v: f64, step: f64) -> Result<(SpdMatrix, SpdMatrix)> {
    steady_bounds_from(&gramians(&model.triplet(), v, step)?)
}

pub fn steady_bounds_from(g: &GramianSet) -> Result<(SpdMatrix, SpdMatrix)> {
    let lower = inv_pd(&(g.o_v_of_c.as_mat() + inv_pd(&g.c_v)?))?;
    let upper = inv_pd(&g.o_v)? + g.c_v_of_o.as_mat();
    Ok((SpdMatrix::new(lower)?, SpdMatrix::new(symmetrize(&upper))?))
}

/// Numerical ranks of the controllability and observability matrices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankReport {
    pub dim: usize,
    pub controllability_rank: usize,
    pub controllability_min_sv: f64,
    pub observability_rank: usize,
    pub observability_min_sv: f64,
}

impl RankReport {
    pub fn controllable(&self) -> bool {
        self.controllability_rank == self.dim
    }

    pub fn observable(&self) -> bool {
        self.observability_rank == self.dim
    }
}

/// Ranks of `[R^{1/2}, A R^{1/2}, ..., A^{r-1} R^{1/2}]` and
/// `[C; CA; ...; CA^{r-1}]` at relative singular-value tolerance `svd_tol`.
pub fn check_rank_conditions(model: &FilterModel, svd_tol: f64) -> RankReport {
    let n = model.dim();
    let rp = model.obs_dim();
    let a = model.a();
    let mut ctrb = Mat::zeros(n, n * n);
    let mut obsv = Mat::zeros(rp * n, n);
    let mut blk = model.r_sqrt().clone();
    let mut row = model.c().clone();
    for k in 0..n {
        ctrb.view_mut((0, k * n), (n, n)).copy_from(&blk);
        obsv.view_mut((k * rp, 0), (rp, n)).copy_from(&row);
        blk = a * blk;
        row = row * a;
    }
    let (cr, csv) = matlib::numerical_rank(&ctrb, svd_tol);
    let (or, osv) = matlib::numerical_rank(&obsv, svd_tol);
    RankReport {
        dim: n,
        controllability_rank: cr,
        controllability_min_sv: csv,
        observability_rank: or,
        observability_min_sv: osv,
    }
}
