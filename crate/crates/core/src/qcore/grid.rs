use std::sync::Arc;

use crate::error::{Error, Result};

pub(crate) fn check_base(q: f64) -> Result<()> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("base q = {q} must lie in (0, 1)")))
    }
}

/// A finite window `{q^n_start, q^(n_start-1), ...}` of the time scale `T_q`.
///
/// Points are stored in increasing order, so `points()[0]` is the smallest
/// point and `points()[k + 1] = points()[k] / q`. Index `k` carries the
/// exponent `n_start - k`. The point `t = 0` is never part of a grid.
#[derive(Debug, Clone)]
pub struct QGrid {
    q: f64,
    n_start: i32,
    points: Arc<[f64]>,
}

impl PartialEq for QGrid {
    fn eq(&self, other: &Self) -> bool {
        self.q == other.q && self.n_start == other.n_start && self.points.len() == other.points.len()
    }
}

impl QGrid {
    /// Materializes `count` points starting at the anchor `q^n_start`.
    pub fn new(q: f64, n_start: i32, count: usize) -> Result<Self> {
        check_base(q)?;
        if count == 0 {
            return Err(Error::Argument("grid needs at least one point".into()));
        }
        let last = n_start as i64 - count as i64 + 1;
        if last < i32::MIN as i64 {
            return Err(Error::Range(format!("exponent {last} out of range")));
        }
        let points: Vec<f64> = (0..count).map(|k| q.powi(n_start - k as i32)).collect();
        if points.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err(Error::Range(format!(
                "q^{n_start}..q^{last} is not representable for q = {q}"
            )));
        }
        Ok(Self { q, n_start, points: points.into() })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn n_start(&self) -> i32 {
        self.n_start
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn point(&self, index: usize) -> f64 {
        self.points[index]
    }

    /// Exponent `n` with `points()[index] = q^n`.
    pub fn exponent(&self, index: usize) -> i32 {
        self.n_start - index as i32
    }

    pub fn last(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    pub(crate) fn check_index(&self, index: usize) -> Result<()> {
        if index < self.len() {
            Ok(())
        } else {
            Err(Error::Argument(format!(
                "index {index} outside a grid of {} points",
                self.len()
            )))
        }
    }

    pub(crate) fn check_same(&self, other: &QGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::Argument(format!(
                "grid mismatch: (q={}, n_start={}, count={}) vs (q={}, n_start={}, count={})",
                self.q,
                self.n_start,
                self.len(),
                other.q,
                other.n_start,
                other.len()
            )))
        }
    }
}

/// A real function sampled on a [`QGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFn {
    grid: QGrid,
    values: Vec<f64>,
}

impl GridFn {
    pub fn new(grid: QGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Argument(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Range(format!("non-finite value {} at index {i}", values[i])));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: &QGrid, mut f: impl FnMut(f64) -> f64) -> Result<Self> {
        let values = grid.points().iter().map(|&t| f(t)).collect();
        Self::new(grid.clone(), values)
    }

    pub fn constant(grid: &QGrid, c: f64) -> Self {
        Self { grid: grid.clone(), values: vec![c; grid.len()] }
    }

    pub fn zeros(grid: &QGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn grid(&self) -> &QGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, index: usize) -> f64 {
        self.values[index]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Pointwise map, keeping the grid.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Result<Self> {
        Self::new(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise combination of two functions on the same grid.
    pub fn zip_with(&self, other: &GridFn, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self::new(self.grid.clone(), values)
    }

    /// `max |self - other|` over indices `from..`.
    pub fn sup_distance_from(&self, other: &GridFn, from: usize) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self.values[from..]
            .iter()
            .zip(&other.values[from..])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// `max |self|` over indices `from..`.
    pub fn sup_norm_from(&self, from: usize) -> f64 {
        self.values[from..].iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

/// Order `alpha > 0` of a fractional operator, with `n = ceil(alpha)`
/// (that is `[alpha] + 1` for non-integer orders and `alpha` itself otherwise).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FracOrder {
    alpha: f64,
    n: usize,
}

impl FracOrder {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Domain(format!("order alpha = {alpha} must be positive")));
        }
        Ok(Self { alpha, n: alpha.ceil() as usize })
    }

    /// Order restricted to `0 < alpha <= 1`, the range of the solvers and bounds.
    pub fn unit(alpha: f64) -> Result<Self> {
        let order = Self::new(alpha)?;
        order.ensure_unit()?;
        Ok(order)
    }

    pub fn ensure_unit(&self) -> Result<()> {
        if self.alpha <= 1.0 {
            Ok(())
        } else {
            Err(Error::Domain(format!("order alpha = {} must satisfy 0 < alpha <= 1", self.alpha)))
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_integer(&self) -> bool {
        self.alpha.fract() == 0.0
    }
}

/// Truncation control for series and infinite products.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_terms: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { rel_tol: 1e-15, abs_tol: 0.0, max_terms: 10_000 }
    }
}

impl Tolerance {
    pub fn new(rel_tol: f64, abs_tol: f64, max_terms: usize) -> Result<Self> {
        if !(rel_tol > 0.0) || !(abs_tol >= 0.0) || max_terms < 1 {
            return Err(Error::Domain(format!(
                "tolerance needs rel_tol > 0, abs_tol >= 0, max_terms >= 1 (got {rel_tol}, {abs_tol}, {max_terms})"
            )));
        }
        Ok(Self { rel_tol, abs_tol, max_terms })
    }

    /// `|term| <= abs_tol + rel_tol * |scale|`
    pub fn negligible(&self, term: f64, scale: f64) -> bool {
        term.abs() <= self.abs_tol + self.rel_tol * scale.abs()
    }
}
