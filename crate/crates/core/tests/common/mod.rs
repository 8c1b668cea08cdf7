#![allow(dead_code)]

use kbflow::matlib::Mat;

/// Scaling and squaring with a truncated Taylor series.
pub fn expm(a: &Mat) -> Mat {
    let n = a.nrows();
    let norm = a.norm();
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = a / 2f64.powi(s);
    let mut term = Mat::identity(n, n);
    let mut sum = Mat::identity(n, n);
    for k in 1..30 {
        term = &term * &scaled / k as f64;
        sum += &term;
        if term.norm() < 1e-18 * sum.norm() {
            break;
        }
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// Composite Simpson rule for a matrix-valued integrand on `[0, v]`.
pub fn simpson(f: impl Fn(f64) -> Mat, v: f64, intervals: usize) -> Mat {
    let m = intervals + intervals % 2;
    let h = v / m as f64;
    let mut acc = f(0.0) + f(v);
    for k in 1..m {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += f(k as f64 * h) * w;
    }
    acc * (h / 3.0)
}

/// Central difference of a matrix-valued map along a direction.
pub fn central_difference(f: impl Fn(f64) -> Mat, h: f64) -> Mat {
    (f(h) - f(-h)) / (2.0 * h)
}
