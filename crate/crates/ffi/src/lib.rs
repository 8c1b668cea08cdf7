//! C ABI over `kbflow`.
//!
//! Matrices cross the boundary as row-major `double` arrays of length `n * n`
//! (vectors of length `n`). Every fallible call returns a [`KbStatus`]; on
//! failure the message is kept per thread and read with
//! [`kb_last_error_message`]. Handles are created by `*_new`/constructor
//! calls and released with the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use kbflow::gaussmetrics::{kl_gaussian, logdet_bound_check, w2_gaussian, GaussianLaw};
use kbflow::riccati::{are_solve, flow_to};
use kbflow::schemes::{scheme_riccati_closed_form, SchemeCoefficients};
use kbflow::{AssociationScheme, DriftVariant, Error, FilterModel, Mat, RegMap, Vector};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    UnknownSuite = 4,
    Panic = 5,
}

/// Filter model `(A, R, C, Sigma, x0, P0)`.
pub struct KbModel {
    inner: FilterModel,
}

/// Validated association scheme.
pub struct KbScheme {
    inner: Arc<AssociationScheme>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> KbStatus {
    match e {
        Error::UnknownSuite(_) => KbStatus::UnknownSuite,
        Error::BlowUp { .. }
        | Error::NoConvergence { .. }
        | Error::NotHurwitz { .. }
        | Error::SingularLyapunov
        | Error::SingularGramian { .. }
        | Error::DistanceUnderflow { .. }
        | Error::GroupingAmbiguity { .. } => KbStatus::Numerical,
        _ => KbStatus::InvalidArgument,
    }
}

/// Run `f`, mapping errors and panics to a status and recording the message.
fn guard(f: impl FnOnce() -> Result<(), (KbStatus, String)>) -> KbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => KbStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside kbflow".into());
            KbStatus::Panic
        }
    }
}

fn lib<T>(r: kbflow::Result<T>) -> Result<T, (KbStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (KbStatus, String) {
    (KbStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_mat(p: *const f64, rows: usize, cols: usize, what: &str) -> Result<Mat, (KbStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = std::slice::from_raw_parts(p, rows * cols);
    Ok(Mat::from_row_slice(rows, cols, s))
}

unsafe fn read_vec(p: *const f64, n: usize, what: &str) -> Result<Vector, (KbStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(Vector::from_column_slice(std::slice::from_raw_parts(p, n)))
}

unsafe fn write_mat(m: &Mat, out: *mut f64) {
    let (r, c) = m.shape();
    let dst = std::slice::from_raw_parts_mut(out, r * c);
    for i in 0..r {
        for j in 0..c {
            dst[i * c + j] = m[(i, j)];
        }
    }
}

fn positive_dim(n: usize) -> Result<(), (KbStatus, String)> {
    if n == 0 {
        Err((KbStatus::InvalidArgument, "dimension must be positive".into()))
    } else {
        Ok(())
    }
}

/// Copy the calling thread's last error message into `buf` (nul-terminated,
/// truncated to `len`). Returns the full message length without the nul, or
/// 0 when no error is recorded.
#[no_mangle]
pub unsafe extern "C" fn kb_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && len > 0 {
                let k = bytes.len().min(len - 1);
                ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, k);
                *buf.add(k) = 0;
            }
            bytes.len()
        }
    })
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn kb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Build a model of state dimension `n` and observation dimension `m`.
/// `a`, `r`, `p0` are `n x n`, `c` is `m x n`, `sigma` is `m x m`, `x0` has
/// length `n`.
#[no_mangle]
pub unsafe extern "C" fn kb_model_new(
    n: usize,
    m: usize,
    a: *const f64,
    r: *const f64,
    c: *const f64,
    sigma: *const f64,
    x0: *const f64,
    p0: *const f64,
    out: *mut *mut KbModel,
) -> KbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        positive_dim(n)?;
        positive_dim(m)?;
        let model = lib(FilterModel::new(
            read_mat(a, n, n, "A")?,
            read_mat(r, n, n, "R")?,
            read_mat(c, m, n, "C")?,
            read_mat(sigma, m, m, "Sigma")?,
            read_vec(x0, n, "x0")?,
            read_mat(p0, n, n, "P0")?,
        ))?;
        *out = Box::into_raw(Box::new(KbModel { inner: model }));
        Ok(())
    })
}

/// Release a model; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn kb_model_free(model: *mut KbModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

#[no_mangle]
pub unsafe extern "C" fn kb_model_dim(model: *const KbModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.dim())
}

unsafe fn flow_common(
    model: *const KbModel,
    variant: impl FnOnce(usize) -> Result<DriftVariant, (KbStatus, String)>,
    q0: *const f64,
    t: f64,
    step: f64,
    out: *mut f64,
) -> KbStatus {
    guard(|| {
        let model = &model.as_ref().ok_or_else(|| null("model"))?.inner;
        if out.is_null() {
            return Err(null("out"));
        }
        let n = model.dim();
        let q = read_mat(q0, n, n, "Q0")?;
        let p = lib(flow_to(model, &variant(n)?, &q, t, step))?;
        write_mat(&p, out);
        Ok(())
    })
}

/// Nominal Riccati flow `phi_t(Q0)` by RK4 with step `step`; writes `n x n`
/// doubles to `out`.
#[no_mangle]
pub unsafe extern "C" fn kb_flow(
    model: *const KbModel,
    q0: *const f64,
    t: f64,
    step: f64,
    out: *mut f64,
) -> KbStatus {
    flow_common(model, |_| Ok(DriftVariant::Nominal), q0, t, step, out)
}

/// Flow with gain regularized by the inflation map `Q + eps T`.
#[no_mangle]
pub unsafe extern "C" fn kb_flow_inflation(
    model: *const KbModel,
    epsilon: f64,
    t_mat: *const f64,
    q0: *const f64,
    t: f64,
    step: f64,
    out: *mut f64,
) -> KbStatus {
    flow_common(
        model,
        |n| {
            let tm = read_mat(t_mat, n, n, "T")?;
            Ok(DriftVariant::Perturbed(lib(RegMap::inflation(epsilon, tm))?))
        },
        q0,
        t,
        step,
        out,
    )
}

/// Stabilizing solution of the algebraic Riccati equation to residual
/// `tol |R|_F`.
#[no_mangle]
pub unsafe extern "C" fn kb_are_solve(model: *const KbModel, tol: f64, out: *mut f64) -> KbStatus {
    guard(|| {
        let model = &model.as_ref().ok_or_else(|| null("model"))?.inner;
        if out.is_null() {
            return Err(null("out"));
        }
        let p = lib(are_solve(model, &DriftVariant::Nominal, tol))?;
        write_mat(p.as_mat(), out);
        Ok(())
    })
}

unsafe fn laws(
    n: usize,
    m1: *const f64,
    q1: *const f64,
    m2: *const f64,
    q2: *const f64,
) -> Result<(GaussianLaw, GaussianLaw), (KbStatus, String)> {
    positive_dim(n)?;
    let g1 = lib(GaussianLaw::new(read_vec(m1, n, "m1")?, read_mat(q1, n, n, "Q1")?))?;
    let g2 = lib(GaussianLaw::new(read_vec(m2, n, "m2")?, read_mat(q2, n, n, "Q2")?))?;
    Ok((g1, g2))
}

/// Wasserstein-2 distance between `N(m1, Q1)` and `N(m2, Q2)`.
#[no_mangle]
pub unsafe extern "C" fn kb_w2_gaussian(
    n: usize,
    m1: *const f64,
    q1: *const f64,
    m2: *const f64,
    q2: *const f64,
    out: *mut f64,
) -> KbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let (g1, g2) = laws(n, m1, q1, m2, q2)?;
        *out = lib(w2_gaussian(&g1, &g2))?;
        Ok(())
    })
}

/// Relative entropy `KL(N(m1, Q1) | N(m2, Q2))`.
#[no_mangle]
pub unsafe extern "C" fn kb_kl_gaussian(
    n: usize,
    m1: *const f64,
    q1: *const f64,
    m2: *const f64,
    q2: *const f64,
    out: *mut f64,
) -> KbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let (g1, g2) = laws(n, m1, q1, m2, q2)?;
        *out = lib(kl_gaussian(&g1, &g2))?;
        Ok(())
    })
}

/// Both sides of `|log det(I - A)| <= 3/2 sqrt(n) |A|_2`; `ok` receives 1
/// when the inequality holds.
#[no_mangle]
pub unsafe extern "C" fn kb_logdet_bound_check(
    n: usize,
    a: *const f64,
    lhs: *mut f64,
    rhs: *mut f64,
    ok: *mut i32,
) -> KbStatus {
    guard(|| {
        if lhs.is_null() || rhs.is_null() || ok.is_null() {
            return Err(null("output"));
        }
        positive_dim(n)?;
        let c = lib(logdet_bound_check(&read_mat(a, n, n, "A")?))?;
        *lhs = c.lhs;
        *rhs = c.rhs;
        *ok = c.ok as i32;
        Ok(())
    })
}

fn scheme_out(out: *mut *mut KbScheme, s: kbflow::Result<AssociationScheme>) -> Result<(), (KbStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    let s = lib(s)?;
    unsafe { *out = Box::into_raw(Box::new(KbScheme { inner: Arc::new(s) })) };
    Ok(())
}

/// Distance scheme of the `r`-cycle.
#[no_mangle]
pub unsafe extern "C" fn kb_scheme_cycle(r: usize, out: *mut *mut KbScheme) -> KbStatus {
    guard(|| scheme_out(out, AssociationScheme::cycle(r)))
}

/// Two disjoint triangles on six points.
#[no_mangle]
pub unsafe extern "C" fn kb_scheme_two_triangles(out: *mut *mut KbScheme) -> KbStatus {
    guard(|| scheme_out(out, Ok(AssociationScheme::two_triangles())))
}

/// Scheme from an `r x r` row-major class matrix with integer labels.
#[no_mangle]
pub unsafe extern "C" fn kb_scheme_from_class_matrix(
    r: usize,
    classes: *const u32,
    out: *mut *mut KbScheme,
) -> KbStatus {
    guard(|| {
        positive_dim(r)?;
        if classes.is_null() {
            return Err(null("classes"));
        }
        let labels = std::slice::from_raw_parts(classes, r * r);
        let m = Mat::from_fn(r, r, |i, j| labels[i * r + j] as f64);
        scheme_out(out, AssociationScheme::from_class_matrix(&m))
    })
}

#[no_mangle]
pub unsafe extern "C" fn kb_scheme_free(scheme: *mut KbScheme) {
    if !scheme.is_null() {
        drop(Box::from_raw(scheme));
    }
}

#[no_mangle]
pub unsafe extern "C" fn kb_scheme_points(scheme: *const KbScheme) -> usize {
    scheme.as_ref().map_or(0, |s| s.inner.points())
}

#[no_mangle]
pub unsafe extern "C" fn kb_scheme_idempotent_count(scheme: *const KbScheme) -> usize {
    scheme.as_ref().map_or(0, |s| s.inner.idempotent_count())
}

/// Closed-form Riccati solution at time `t` for `A`, `R`, `S`, `P0` in the
/// scheme's algebra (all `r x r`).
#[no_mangle]
pub unsafe extern "C" fn kb_scheme_closed_form(
    scheme: *const KbScheme,
    a: *const f64,
    r: *const f64,
    s: *const f64,
    p0: *const f64,
    t: f64,
    out: *mut f64,
) -> KbStatus {
    guard(|| {
        let scheme = &scheme.as_ref().ok_or_else(|| null("scheme"))?.inner;
        if out.is_null() {
            return Err(null("out"));
        }
        let n = scheme.points();
        let coeffs = lib(SchemeCoefficients::from_matrices(
            scheme,
            &read_mat(a, n, n, "A")?,
            &read_mat(r, n, n, "R")?,
            &read_mat(s, n, n, "S")?,
            &read_mat(p0, n, n, "P0")?,
        ))?;
        let p = lib(scheme_riccati_closed_form(scheme, &coeffs, t))?;
        write_mat(p.as_mat(), out);
        Ok(())
    })
}

/// Run a verification suite and return its JSON report in `*out_json`
/// (release with [`kb_string_free`]). `*passed` receives 1 when the suite
/// passed.
#[no_mangle]
pub unsafe extern "C" fn kb_verify(
    suite: *const c_char,
    seed: u64,
    out_json: *mut *mut c_char,
    passed: *mut i32,
) -> KbStatus {
    guard(|| {
        if suite.is_null() {
            return Err(null("suite"));
        }
        if out_json.is_null() || passed.is_null() {
            return Err(null("output"));
        }
        let name = CStr::from_ptr(suite)
            .to_str()
            .map_err(|_| (KbStatus::InvalidArgument, "suite name is not UTF-8".to_string()))?;
        let report = lib(kbflow::lab::verify(name, seed))?;
        *passed = report.passed() as i32;
        *out_json = CString::new(report.to_json())
            .expect("JSON has no nul")
            .into_raw();
        Ok(())
    })
}

/// Release a string returned by this library; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn kb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
