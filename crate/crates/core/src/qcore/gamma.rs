use std::collections::HashMap;
use std::sync::{Arc, LazyLock, RwLock};

use super::{check_base, q_factorial_power, q_ratio_product, Tolerance};
use crate::error::{Error, Result};

/// q-Gamma function, `Gamma_q(alpha) = (1 - q)_q^(alpha - 1) / (1 - q)^(alpha - 1)`.
///
/// Integer arguments reduce to `[1]_q [2]_q ... [alpha - 1]_q`.
pub fn gamma_q(alpha: f64, q: f64, tol: &Tolerance) -> Result<f64> {
    check_base(q)?;
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!("Gamma_q needs alpha > 0 (got {alpha})")));
    }
    let nu = alpha - 1.0;
    let v = q_factorial_power(1.0, q, nu, q, tol)? / (1.0 - q).powf(nu);
    if !v.is_finite() {
        return Err(Error::Range(format!("Gamma_q({alpha}) overflows for q = {q}")));
    }
    Ok(v)
}

/// `Gamma_q(x) / Gamma_q(x + shift)` evaluated as one product, so that it
/// stays finite even when both Gamma values overflow.
pub fn gamma_ratio(x: f64, shift: f64, q: f64, tol: &Tolerance) -> Result<f64> {
    check_base(q)?;
    if !(x > 0.0) || !(x + shift > 0.0) {
        return Err(Error::Domain(format!("Gamma_q ratio needs x > 0 and x + shift > 0 (got {x}, {shift})")));
    }
    let (p, _) = q_ratio_product(q.powf(x), shift, q, tol)?;
    Ok((1.0 - q).powf(shift) / p)
}

/// `Gamma_q` sampled along `alpha k + beta`, k = 0, 1, 2, ...
///
/// Stores `Gamma_q(beta)` and the consecutive ratios
/// `Gamma_q(alpha (k - 1) + beta) / Gamma_q(alpha k + beta)`; the ratios are
/// what the Mittag-Leffler recurrences consume and, unlike the raw values,
/// never overflow.
#[derive(Debug)]
pub struct GammaProgression {
    q: f64,
    alpha: f64,
    beta: f64,
    tol: Tolerance,
    first: f64,
    ratios: RwLock<Vec<f64>>,
}

impl GammaProgression {
    fn new(q: f64, alpha: f64, beta: f64, tol: Tolerance) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::Domain(format!("progression step alpha = {alpha} must be positive")));
        }
        let first = gamma_q(beta, q, &tol)?;
        Ok(Self { q, alpha, beta, tol, first, ratios: RwLock::new(Vec::new()) })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// `Gamma_q(beta)`.
    pub fn first(&self) -> f64 {
        self.first
    }

    /// `Gamma_q(alpha k + beta)`, computed directly.
    pub fn value(&self, k: usize) -> Result<f64> {
        gamma_q(self.alpha * k as f64 + self.beta, self.q, &self.tol)
    }

    /// `Gamma_q(alpha (k - 1) + beta) / Gamma_q(alpha k + beta)` for `k >= 1`.
    pub fn ratio(&self, k: usize) -> Result<f64> {
        if k == 0 {
            return Err(Error::Argument("progression ratios start at k = 1".into()));
        }
        {
            let cached = self.ratios.read().expect("gamma cache poisoned");
            if let Some(&r) = cached.get(k - 1) {
                return Ok(r);
            }
        }
        let mut cached = self.ratios.write().expect("gamma cache poisoned");
        while cached.len() < k {
            let j = cached.len();
            let x = self.alpha * j as f64 + self.beta;
            cached.push(gamma_ratio(x, self.alpha, self.q, &self.tol)?);
        }
        Ok(cached[k - 1])
    }
}

type ProgressionKey = (u64, u64, u64, usize);

static PROGRESSIONS: LazyLock<RwLock<HashMap<ProgressionKey, Arc<GammaProgression>>>> =
    LazyLock::new(|| RwLock::new(HashMap::new()));

/// Shared, lazily extended [`GammaProgression`] for `(q, alpha, beta)`.
pub fn gamma_progression(q: f64, alpha: f64, beta: f64, tol: &Tolerance) -> Result<Arc<GammaProgression>> {
    check_base(q)?;
    let key = (q.to_bits(), alpha.to_bits(), beta.to_bits(), tol.max_terms);
    if let Some(p) = PROGRESSIONS.read().expect("gamma cache poisoned").get(&key) {
        return Ok(Arc::clone(p));
    }
    let fresh = Arc::new(GammaProgression::new(q, alpha, beta, *tol)?);
    let mut map = PROGRESSIONS.write().expect("gamma cache poisoned");
    Ok(Arc::clone(map.entry(key).or_insert(fresh)))
}
