//! q-Mittag-Leffler functions and the q-exponentials `e_q`, `E_q`.
//!
//! The series `sum_k lambda^k (t - t0)_q^(alpha k + shift) / Gamma_q(alpha k + beta)`
//! is summed with a term recurrence: the power is advanced by one factor
//! `(t - q^(alpha k + shift) t0)_q^alpha` and the Gamma quotient comes from the
//! shared [`GammaProgression`](crate::qcore::GammaProgression). Consecutive
//! terms tend to the ratio `lambda t^alpha (1 - q)^alpha`, so evaluations with
//! `|lambda| t^alpha (1 - q)^alpha >= 1` are refused up front.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::qcore::compensated::{CompensatedProduct, CompensatedSum};
use crate::qcore::{check_base, gamma_progression, q_bracket, q_factorial_power, GammaProgression, Tolerance};

/// Consecutive negligible terms required before a series is declared converged.
const SMALL_TERMS_TO_STOP: usize = 3;

/// Parameters of a q-Mittag-Leffler evaluation `E_{alpha,beta}(lambda, t - t0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MLSpec {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub t0: f64,
    pub tol: Tolerance,
}

impl MLSpec {
    pub fn new(alpha: f64, beta: f64, lambda: f64, t0: f64) -> Result<Self> {
        if !(alpha > 0.0) || !(beta > 0.0) {
            return Err(Error::Domain(format!(
                "Mittag-Leffler parameters need alpha > 0 and beta > 0 (got {alpha}, {beta})"
            )));
        }
        if !(t0 >= 0.0) || !lambda.is_finite() {
            return Err(Error::Domain(format!("need t0 >= 0 and finite lambda (got {t0}, {lambda})")));
        }
        Ok(Self { alpha, beta, lambda, t0, tol: Tolerance::default() })
    }

    pub fn with_tol(mut self, tol: Tolerance) -> Self {
        self.tol = tol;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MLResult {
    pub value: f64,
    pub terms_used: usize,
    pub last_term_ratio: f64,
    pub converged: bool,
}

/// Asymptotic ratio `|lambda| t^alpha (1 - q)^alpha` of consecutive
/// q-Mittag-Leffler terms; the series converges when it is below one.
pub fn convergence_ratio_estimate(alpha: f64, q: f64, t: f64, a: f64, lambda: f64) -> f64 {
    debug_assert!(t >= a, "ratio estimate needs t >= a");
    lambda.abs() * (t * (1.0 - q)).powf(alpha)
}

/// Terms of `sum_k lambda^k (t - t0)_q^(alpha k + shift) / Gamma_q(alpha k + beta)`.
pub struct MLTerms {
    spec: MLSpec,
    shift: f64,
    t: f64,
    q: f64,
    gammas: Arc<GammaProgression>,
    k: usize,
    prev: f64,
}

impl MLTerms {
    fn new(spec: &MLSpec, shift: f64, t: f64, q: f64) -> Result<Self> {
        check_base(q)?;
        if !(t > 0.0) || t < spec.t0 {
            return Err(Error::Domain(format!(
                "Mittag-Leffler argument needs t > 0 and t >= t0 (got t = {t}, t0 = {})",
                spec.t0
            )));
        }
        let estimate = convergence_ratio_estimate(spec.alpha, q, t, spec.t0, spec.lambda);
        if estimate >= 1.0 {
            return Err(Error::Divergence {
                ratio: estimate,
                context: format!(
                    "|lambda| t^alpha (1-q)^alpha >= 1 for lambda = {}, t = {t}, alpha = {}, q = {q}",
                    spec.lambda, spec.alpha
                ),
            });
        }
        let gammas = gamma_progression(q, spec.alpha, spec.beta, &spec.tol)?;
        Ok(Self { spec: *spec, shift, t, q, gammas, k: 0, prev: 0.0 })
    }

    fn power_ratio(&self, k: usize) -> Result<f64> {
        // (t - t0)^(x + alpha) = (t - t0)^x (t - q^x t0)^alpha with x = alpha (k - 1) + shift
        let (t, t0, q, alpha) = (self.t, self.spec.t0, self.q, self.spec.alpha);
        let x = alpha * (k - 1) as f64 + self.shift;
        let base = q.powf(x) * t0;
        if base <= t {
            return q_factorial_power(t, base, alpha, q, &self.spec.tol);
        }
        // only reachable for a negative shift at k = 1
        let before = q_factorial_power(t, t0, x, q, &self.spec.tol)?;
        Ok(q_factorial_power(t, t0, x + alpha, q, &self.spec.tol)? / before)
    }

    fn next_term(&mut self) -> Result<f64> {
        let term = if self.k == 0 {
            q_factorial_power(self.t, self.spec.t0, self.shift, self.q, &self.spec.tol)? / self.gammas.first()
        } else if self.prev == 0.0 {
            0.0
        } else {
            self.prev * self.spec.lambda * self.power_ratio(self.k)? * self.gammas.ratio(self.k)?
        };
        self.k += 1;
        self.prev = term;
        Ok(term)
    }
}

impl Iterator for MLTerms {
    type Item = Result<f64>;

    fn next(&mut self) -> Option<Self::Item> {
        Some(self.next_term())
    }
}

fn sum_series(mut terms: MLTerms) -> Result<MLResult> {
    let tol = terms.spec.tol;
    let mut acc = CompensatedSum::new();
    let mut small = 0;
    let mut growing = 0;
    let mut prev = 0.0;
    let mut ratio = 0.0;
    for k in 0..tol.max_terms {
        let term = terms.next_term()?;
        acc.add(term);
        if k == 0 {
            prev = term;
            if term == 0.0 {
                // every later term carries the same vanishing power
                return Ok(MLResult { value: 0.0, terms_used: 1, last_term_ratio: 0.0, converged: true });
            }
            continue;
        }
        ratio = term / prev;
        prev = term;
        if term == 0.0 {
            return Ok(MLResult { value: acc.value(), terms_used: k + 1, last_term_ratio: ratio, converged: true });
        }
        growing = if ratio.abs() >= 1.0 { growing + 1 } else { 0 };
        if growing >= tol.max_terms {
            break;
        }
        small = if tol.negligible(term, acc.value()) { small + 1 } else { 0 };
        if small >= SMALL_TERMS_TO_STOP && ratio.abs() < 1.0 {
            return Ok(MLResult { value: acc.value(), terms_used: k + 1, last_term_ratio: ratio, converged: true });
        }
    }
    if growing > 0 {
        return Err(Error::Divergence { ratio, context: "terms stopped shrinking".into() });
    }
    Ok(MLResult { value: acc.value(), terms_used: tol.max_terms, last_term_ratio: ratio, converged: false })
}

/// `E_{alpha,beta}(lambda, t - t0) = sum_k lambda^k (t - t0)_q^(alpha k) / Gamma_q(alpha k + beta)`.
pub fn mittag_leffler(spec: &MLSpec, t: f64, q: f64) -> Result<MLResult> {
    sum_series(MLTerms::new(spec, 0.0, t, q)?)
}

/// `e_{alpha,beta}(lambda, t - t0)`, the variant whose powers carry the extra `beta - 1`.
pub fn mittag_leffler_modified(spec: &MLSpec, t: f64, q: f64) -> Result<MLResult> {
    sum_series(MLTerms::new(spec, spec.beta - 1.0, t, q)?)
}

/// The individual terms of [`mittag_leffler`], starting at `k = 0`.
pub fn mittag_leffler_terms(spec: &MLSpec, t: f64, q: f64) -> Result<MLTerms> {
    MLTerms::new(spec, 0.0, t, q)
}

/// Small q-exponential `e_q(t) = sum_k t^k / [k]_q!`, for `|t| (1 - q) < 1`.
pub fn q_exp_small(t: f64, q: f64, tol: &Tolerance) -> Result<f64> {
    check_base(q)?;
    let ratio_limit = t.abs() * (1.0 - q);
    if ratio_limit >= 1.0 {
        return Err(Error::Divergence { ratio: ratio_limit, context: "e_q(t) needs |t| (1 - q) < 1".into() });
    }
    let mut acc = CompensatedSum::new();
    let mut term = 1.0;
    acc.add(term);
    let mut small = 0;
    for k in 1..tol.max_terms {
        term *= t / q_bracket(k as f64, q)?;
        acc.add(term);
        small = if tol.negligible(term, acc.value()) { small + 1 } else { 0 };
        if term == 0.0 || small >= SMALL_TERMS_TO_STOP {
            break;
        }
    }
    Ok(acc.value())
}

/// Big q-exponential `E_q(t) = prod_{n>=0} 1 / (1 - q^n t)`.
pub fn q_exp_big(t: f64, q: f64, tol: &Tolerance) -> Result<f64> {
    check_base(q)?;
    let mut p = CompensatedProduct::new();
    let mut qn = 1.0;
    for n in 0..tol.max_terms {
        let x = qn * t;
        if x.abs() < f64::EPSILON * (1.0 - q) {
            break;
        }
        let factor = 1.0 - x;
        if factor.abs() <= 4.0 * f64::EPSILON {
            return Err(Error::Pole { n });
        }
        p.mul(factor);
        qn *= q;
    }
    let v = 1.0 / p.value();
    if !v.is_finite() {
        return Err(Error::Range(format!("E_q({t}) is not representable")));
    }
    Ok(v)
}

/// Series form `E_q(t) = sum_n t^n / (q)_n`, for `|t| < 1`.
pub fn q_exp_big_series(t: f64, q: f64, tol: &Tolerance) -> Result<f64> {
    check_base(q)?;
    if t.abs() >= 1.0 {
        return Err(Error::Divergence { ratio: t.abs(), context: "series form of E_q needs |t| < 1".into() });
    }
    let mut acc = CompensatedSum::new();
    let mut term = 1.0;
    acc.add(term);
    let mut qn = 1.0;
    let mut small = 0;
    for _ in 1..tol.max_terms {
        qn *= q;
        term *= t / (1.0 - qn);
        acc.add(term);
        small = if tol.negligible(term, acc.value()) { small + 1 } else { 0 };
        if term == 0.0 || small >= SMALL_TERMS_TO_STOP {
            break;
        }
    }
    Ok(acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::gamma_q;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    #[test]
    fn ml_lambda_zero_is_reciprocal_gamma() {
        let spec = MLSpec::new(0.5, 1.0, 0.0, 0.0).unwrap();
        let r = mittag_leffler(&spec, 1.0, 0.5).unwrap();
        assert_eq!(r.value, 1.0);
        assert!(r.converged);
        let spec = MLSpec::new(0.5, 2.5, 0.0, 0.0).unwrap();
        let r = mittag_leffler(&spec, 0.7, 0.5).unwrap();
        assert!((r.value - 1.0 / gamma_q(2.5, 0.5, &tol()).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn ml_at_lower_limit_is_one() {
        let spec = MLSpec::new(0.5, 1.0, 0.8, 0.25).unwrap();
        let r = mittag_leffler(&spec, 0.25, 0.5).unwrap();
        assert_eq!(r.value, 1.0);
    }

    #[test]
    fn ml_order_one_is_small_exponential() {
        for &q in &[0.3, 0.5, 0.9] {
            for &t in &[0.1, 0.5, 1.0, 3.0] {
                if t * (1.0 - q) >= 0.95 {
                    continue;
                }
                let spec = MLSpec::new(1.0, 1.0, 1.0, 0.0).unwrap();
                let ml = mittag_leffler(&spec, t, q).unwrap().value;
                let e = q_exp_small(t, q, &tol()).unwrap();
                assert!((ml - e).abs() <= 1e-10 * e, "q={q} t={t}: {ml} vs {e}");
            }
        }
    }

    #[test]
    fn ml_refuses_outside_convergence_domain() {
        let spec = MLSpec::new(0.5, 1.0, 2.0, 0.0).unwrap();
        // 2 * sqrt(2 * 0.5) = 2
        match mittag_leffler(&spec, 2.0, 0.5) {
            Err(Error::Divergence { ratio, .. }) => assert!((ratio - 2.0).abs() < 1e-12),
            other => panic!("expected divergence, got {other:?}"),
        }
        assert!(mittag_leffler(&spec, 0.1, 0.5).is_ok());
    }

    #[test]
    fn ml_rejects_bad_arguments() {
        assert!(MLSpec::new(0.0, 1.0, 1.0, 0.0).is_err());
        assert!(MLSpec::new(1.0, -1.0, 1.0, 0.0).is_err());
        let spec = MLSpec::new(1.0, 1.0, 0.1, 1.0).unwrap();
        assert!(matches!(mittag_leffler(&spec, 0.5, 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn modified_with_beta_one_matches_plain() {
        let spec = MLSpec::new(0.7, 1.0, 0.6, 0.2).unwrap();
        let a = mittag_leffler(&spec, 1.3, 0.4).unwrap().value;
        let b = mittag_leffler_modified(&spec, 1.3, 0.4).unwrap().value;
        assert_eq!(a, b);
    }

    #[test]
    fn modified_single_term() {
        let q = 0.5;
        let spec = MLSpec::new(0.6, 0.6, 0.0, 0.1).unwrap();
        let r = mittag_leffler_modified(&spec, 0.8, q).unwrap().value;
        let expected = q_factorial_power(0.8, 0.1, -0.4, q, &tol()).unwrap() / gamma_q(0.6, q, &tol()).unwrap();
        assert!((r - expected).abs() <= 1e-14 * expected);
    }

    #[test]
    fn terms_follow_direct_formula() {
        let q = 0.5;
        let spec = MLSpec::new(0.5, 1.5, -0.7, 0.125).unwrap();
        let terms: Vec<f64> = mittag_leffler_terms(&spec, 1.0, q).unwrap().take(15).collect::<Result<_>>().unwrap();
        for (k, term) in terms.iter().enumerate() {
            let nu = 0.5 * k as f64;
            let direct = (-0.7f64).powi(k as i32) * q_factorial_power(1.0, 0.125, nu, q, &tol()).unwrap()
                / gamma_q(nu + 1.5, q, &tol()).unwrap();
            assert!((term - direct).abs() <= 1e-12 * direct.abs(), "k={k}");
        }
    }

    #[test]
    fn exponentials_identity() {
        let q = 0.5;
        let small = q_exp_small(1.0, q, &tol()).unwrap();
        let big = q_exp_big(0.5, q, &tol()).unwrap();
        let series = q_exp_big_series(0.5, q, &tol()).unwrap();
        assert!((small - big).abs() <= 1e-13 * big);
        assert!((series - big).abs() <= 1e-12 * big);
        assert_eq!(q_exp_small(0.0, q, &tol()).unwrap(), 1.0);
        assert_eq!(q_exp_big(0.0, q, &tol()).unwrap(), 1.0);
    }

    #[test]
    fn exponential_errors() {
        assert!(matches!(q_exp_small(2.0, 0.5, &tol()), Err(Error::Divergence { .. })));
        assert!(matches!(q_exp_big_series(1.0, 0.5, &tol()), Err(Error::Divergence { .. })));
        // E_q has poles at t = q^-n
        assert!(matches!(q_exp_big(4.0, 0.5, &tol()), Err(Error::Pole { n: 2 })));
        assert!(q_exp_big(3.0, 0.5, &tol()).is_ok());
    }

    #[test]
    fn ratio_estimate_values() {
        assert!((convergence_ratio_estimate(0.5, 0.5, 1.0, 0.0, 1.0) - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(convergence_ratio_estimate(0.5, 0.5, 1.0, 0.0, 0.0), 0.0);
        for &(a, q) in &[(0.3, 0.2), (0.9, 0.7)] {
            let v = convergence_ratio_estimate(a, q, 1.0, 0.0, 1.0);
            assert!((v - (1.0f64 - q).powf(a)).abs() < 1e-15);
        }
    }
}
