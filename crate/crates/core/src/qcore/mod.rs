//! Grids on `T_q`, q-numbers, q-factorial powers and the q-Gamma function.

pub mod compensated;
mod gamma;
mod grid;

pub use gamma::{gamma_progression, gamma_q, gamma_ratio, GammaProgression};
pub use grid::{FracOrder, GridFn, QGrid, Tolerance};

pub(crate) use grid::check_base;

use crate::error::{Error, Result};
use compensated::CompensatedProduct;

/// `[r]_q = (1 - q^r) / (1 - q)`.
pub fn q_bracket(r: f64, q: f64) -> Result<f64> {
    check_base(q)?;
    // -expm1(r ln q) keeps digits when q^r is close to 1
    Ok(-(r * q.ln()).exp_m1() / (1.0 - q))
}

/// q-Pochhammer symbol `(q)_n = (1 - q)(1 - q^2)...(1 - q^n)`.
pub fn q_pochhammer(q: f64, n: usize) -> Result<f64> {
    check_base(q)?;
    let mut p = CompensatedProduct::new();
    let mut qi = 1.0;
    for _ in 0..n {
        qi *= q;
        p.mul(1.0 - qi);
    }
    Ok(p.value())
}

/// `ln(eps)/ln(q)`-style cutoff: the number of factors after which
/// `scale * q^i` drops below `eps * (1 - q)`, capped at `max_terms`.
fn factor_count(scale: f64, q: f64, max_terms: usize) -> usize {
    if scale <= 0.0 {
        return 0;
    }
    let target = f64::EPSILON * (1.0 - q) / scale;
    if target >= 1.0 {
        return 1;
    }
    let n = (target.ln() / q.ln()).ceil();
    (n.max(1.0) as usize).min(max_terms)
}

/// The infinite product `prod_{i>=0} (1 - r q^i) / (1 - r q^(i+nu))`.
///
/// Returns the product and the number of factors used. A vanishing
/// denominator is reported as a domain error.
pub fn q_ratio_product(r: f64, nu: f64, q: f64, tol: &Tolerance) -> Result<(f64, usize)> {
    check_base(q)?;
    if r == 0.0 {
        return Ok((1.0, 0));
    }
    let shift = q.powf(nu);
    let terms = factor_count(r.abs() * shift.max(1.0), q, tol.max_terms);
    let mut num = CompensatedProduct::new();
    let mut den = CompensatedProduct::new();
    let mut qi = 1.0;
    for i in 0..terms {
        let d = 1.0 - r * shift * qi;
        if d == 0.0 {
            return Err(Error::Domain(format!(
                "factor {i} of the q-factorial product vanishes (r = {r}, nu = {nu})"
            )));
        }
        num.mul(1.0 - r * qi);
        den.mul(d);
        qi *= q;
    }
    Ok((num.value() / den.value(), terms))
}

fn integer_exponent(nu: f64) -> Option<usize> {
    (nu >= 0.0 && nu.fract() == 0.0 && nu < u32::MAX as f64).then_some(nu as usize)
}

/// q-factorial power `(t - s)_q^nu`.
///
/// Non-negative integer exponents use the finite product
/// `prod_{i<nu} (t - q^i s)`; every other exponent uses
/// `t^nu prod_{i>=0} (1 - (s/t) q^i) / (1 - (s/t) q^(i+nu))`, which needs
/// `s/t < 1` (or `s = t` when `nu > 0`, giving zero).
pub fn q_factorial_power(t: f64, s: f64, nu: f64, q: f64, tol: &Tolerance) -> Result<f64> {
    check_base(q)?;
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("q-factorial power needs t > 0 (got {t})")));
    }
    if !(s >= 0.0) || !s.is_finite() {
        return Err(Error::Domain(format!("q-factorial power needs s >= 0 (got {s})")));
    }
    if let Some(n) = integer_exponent(nu) {
        let mut p = CompensatedProduct::new();
        let mut qi = 1.0;
        for _ in 0..n {
            p.mul(t - qi * s);
            qi *= q;
        }
        return Ok(p.value());
    }
    q_factorial_power_product(t, s, nu, q, tol)
}

/// The infinite-product branch of [`q_factorial_power`], for any real `nu`.
pub fn q_factorial_power_product(t: f64, s: f64, nu: f64, q: f64, tol: &Tolerance) -> Result<f64> {
    check_base(q)?;
    let r = s / t;
    if r > 1.0 || (r == 1.0 && nu <= 0.0) {
        return Err(Error::Domain(format!(
            "(t - s)_q^{nu} needs s/t < 1 (got s = {s}, t = {t})"
        )));
    }
    if r == 1.0 {
        return Ok(0.0);
    }
    let (p, _) = q_ratio_product(r, nu, q, tol)?;
    let v = t.powf(nu) * p;
    if !v.is_finite() {
        return Err(Error::Range(format!("(t - s)_q^{nu} overflows at t = {t}, s = {s}")));
    }
    Ok(v)
}

/// Builds the grid window `q^n_start, q^(n_start - 1), ...` of `count` points.
pub fn make_grid(q: f64, n_start: i32, count: usize) -> Result<QGrid> {
    QGrid::new(q, n_start, count)
}
