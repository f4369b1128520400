//! Nabla q-calculus operators on a [`QGrid`].
//!
//! On a grid window every operator is a finite sum. The left q-fractional
//! integral of order `alpha` from `a = points[a_index]` is
//!
//! ```text
//! (I^alpha f)(t_i) = sum_{a < t_j <= t_i} W[i][j] f(t_j),
//! W[i][j] = (1 - q) t_j (t_i - q t_j)_q^(alpha - 1) / Gamma_q(alpha)
//! ```
//!
//! and is stored once per `(grid, a, alpha)` as an [`OperatorKernel`].

use crate::error::{Error, Result};
use crate::qcore::compensated::{sum, CompensatedSum};
use crate::qcore::{gamma_q, q_factorial_power, FracOrder, GridFn, QGrid, Tolerance};

/// `(f(t) - f(qt)) / ((1 - q) t)` at `t = points[at_index]`.
pub fn nabla_derivative(f: &GridFn, at_index: usize) -> Result<f64> {
    let grid = f.grid();
    grid.check_index(at_index)?;
    if at_index == 0 {
        return Err(Error::Boundary("nabla derivative at the first grid point has no predecessor".into()));
    }
    let t = grid.point(at_index);
    Ok((f.get(at_index) - f.get(at_index - 1)) / ((1.0 - grid.q()) * t))
}

/// Every defined value of the `order`-fold nabla derivative.
///
/// Entry `i` of the result holds `nabla^order f(t_i)` for `i >= order`; the
/// first `order` entries have no value and are set to zero.
pub fn nabla_derivative_n(f: &GridFn, order: usize) -> Result<GridFn> {
    let grid = f.grid();
    if order >= grid.len() && order > 0 {
        return Err(Error::Boundary(format!(
            "{order}-fold nabla derivative needs more than {} grid points",
            grid.len()
        )));
    }
    let scale = 1.0 - grid.q();
    let mut values = f.values().to_vec();
    for level in 1..=order {
        for i in (level..values.len()).rev() {
            values[i] = (values[i] - values[i - 1]) / (scale * grid.point(i));
        }
        values[level - 1] = 0.0;
    }
    GridFn::new(grid.clone(), values)
}

/// `int_{t_from}^{t_to} f(s) nabla_q s = (1 - q) sum_{from < j <= to} t_j f(t_j)`.
pub fn nabla_integral(f: &GridFn, from_index: usize, to_index: usize) -> Result<f64> {
    let grid = f.grid();
    grid.check_index(from_index)?;
    grid.check_index(to_index)?;
    if from_index > to_index {
        return Err(Error::Argument(format!(
            "integral limits out of order: {from_index} > {to_index}"
        )));
    }
    let q = grid.q();
    Ok((1.0 - q) * sum((from_index + 1..=to_index).map(|j| grid.point(j) * f.get(j))))
}

/// Lower-triangular weights of the left q-fractional integral.
#[derive(Debug, Clone)]
pub struct OperatorKernel {
    grid: QGrid,
    a_index: usize,
    alpha: FracOrder,
    weights: Vec<f64>,
}

impl OperatorKernel {
    pub fn build(grid: &QGrid, a_index: usize, alpha: FracOrder, tol: &Tolerance) -> Result<Self> {
        grid.check_index(a_index)?;
        let q = grid.q();
        let n = grid.len();
        let nu = alpha.alpha() - 1.0;
        let scale = (1.0 - q) / gamma_q(alpha.alpha(), q, tol)?;
        let mut weights = vec![0.0; n * n];
        for i in a_index + 1..n {
            let t = grid.point(i);
            for j in a_index + 1..=i {
                let s = grid.point(j);
                weights[i * n + j] = scale * s * q_factorial_power(t, q * s, nu, q, tol)?;
            }
        }
        Ok(Self { grid: grid.clone(), a_index, alpha, weights })
    }

    pub fn grid(&self) -> &QGrid {
        &self.grid
    }

    pub fn a_index(&self) -> usize {
        self.a_index
    }

    pub fn alpha(&self) -> FracOrder {
        self.alpha
    }

    /// `W[i][j]`, the coefficient of `f(t_j)` in `(I^alpha f)(t_i)`.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.grid.len() + j]
    }

    pub fn diagonal(&self, i: usize) -> f64 {
        self.weight(i, i)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.grid.len();
        &self.weights[i * n..(i + 1) * n]
    }

    /// `sum_{a < t_j < t_i} W[i][j] values[j]`: the part of row `i` that does
    /// not involve the unknown at `t_i` itself.
    pub fn history(&self, i: usize, values: &[f64]) -> f64 {
        let row = self.row(i);
        sum((self.a_index + 1..i).map(|j| row[j] * values[j]))
    }

    pub(crate) fn apply_slice(&self, values: &[f64]) -> Vec<f64> {
        let n = self.grid.len();
        (0..n)
            .map(|i| {
                if i <= self.a_index {
                    return 0.0;
                }
                let row = self.row(i);
                let mut acc = CompensatedSum::new();
                for j in self.a_index + 1..=i {
                    acc.add(row[j] * values[j]);
                }
                acc.value()
            })
            .collect()
    }

    /// `(I^alpha f)(t_i)` at every grid point; zero at and below `a`.
    pub fn apply(&self, f: &GridFn) -> Result<GridFn> {
        self.grid.check_same(f.grid())?;
        GridFn::new(self.grid.clone(), self.apply_slice(f.values()))
    }
}

pub fn build_kernel(grid: &QGrid, a_index: usize, alpha: FracOrder, tol: &Tolerance) -> Result<OperatorKernel> {
    OperatorKernel::build(grid, a_index, alpha, tol)
}

pub fn fractional_integral(f: &GridFn, kernel: &OperatorKernel) -> Result<GridFn> {
    kernel.apply(f)
}

/// Result of [`caputo_derivative`]: entries before `valid_from` are undefined
/// (the grid has no predecessors there) and hold zero.
#[derive(Debug, Clone)]
pub struct CaputoDerivative {
    pub values: GridFn,
    pub valid_from: usize,
}

/// Caputo left q-fractional derivative: `I^(n - alpha)` applied to `nabla^n f`,
/// or just `nabla^n f` for integer orders.
pub fn caputo_derivative(f: &GridFn, a_index: usize, alpha: FracOrder, tol: &Tolerance) -> Result<CaputoDerivative> {
    let grid = f.grid();
    grid.check_index(a_index)?;
    let n = alpha.n();
    let dn = nabla_derivative_n(f, n)?;
    if alpha.is_integer() {
        return Ok(CaputoDerivative { values: dn, valid_from: n });
    }
    if a_index + 1 < n {
        return Err(Error::Boundary(format!(
            "Caputo derivative of order {} needs the lower limit at index >= {}",
            alpha.alpha(),
            n - 1
        )));
    }
    let kernel = OperatorKernel::build(grid, a_index, FracOrder::new(n as f64 - alpha.alpha())?, tol)?;
    Ok(CaputoDerivative { values: kernel.apply(&dn)?, valid_from: a_index })
}

/// Max residual of `I^alpha C^alpha f - (f - sum_{k<n} (t - a)_q^k nabla^k f(a) / Gamma_q(k + 1))`
/// over the points `t >= a`. For `0 < alpha <= 1` the sum is just `f(a)`.
pub fn caputo_inverse_identity_check(f: &GridFn, a_index: usize, alpha: FracOrder) -> Result<f64> {
    let tol = Tolerance::default();
    let grid = f.grid();
    let q = grid.q();
    let n = alpha.n();
    if a_index + 1 < n {
        return Err(Error::Boundary(format!("Taylor terms need the lower limit at index >= {}", n - 1)));
    }
    let caputo = caputo_derivative(f, a_index, alpha, &tol)?;
    let kernel = OperatorKernel::build(grid, a_index, alpha, &tol)?;
    let recovered = kernel.apply(&caputo.values)?;
    let a = grid.point(a_index);
    let mut taylor = Vec::with_capacity(n);
    for k in 0..n {
        let dk = nabla_derivative_n(f, k)?.get(a_index);
        taylor.push(dk / gamma_q(k as f64 + 1.0, q, &tol)?);
    }
    let mut worst: f64 = 0.0;
    for i in a_index..grid.len() {
        let t = grid.point(i);
        let mut poly = CompensatedSum::new();
        for (k, c) in taylor.iter().enumerate() {
            poly.add(c * q_factorial_power(t, a, k as f64, q, &tol)?);
        }
        let expected = f.get(i) - poly.value();
        worst = worst.max((recovered.get(i) - expected).abs());
    }
    Ok(worst)
}

/// `phi -> I^alpha (x phi)`.
#[derive(Debug, Clone)]
pub struct OmegaOp {
    kernel: OperatorKernel,
    x: GridFn,
}

impl OmegaOp {
    pub fn new(kernel: OperatorKernel, x: GridFn) -> Result<Self> {
        kernel.grid().check_same(x.grid())?;
        Ok(Self { kernel, x })
    }

    pub fn kernel(&self) -> &OperatorKernel {
        &self.kernel
    }

    pub fn coefficient(&self) -> &GridFn {
        &self.x
    }

    pub fn apply(&self, phi: &GridFn) -> Result<GridFn> {
        let product = self.x.zip_with(phi, |x, p| x * p)?;
        self.kernel.apply(&product)
    }

    /// `Omega^n 1`, by repeated application.
    pub fn power_on_one(&self, n: usize) -> Result<GridFn> {
        let mut phi = GridFn::constant(self.kernel.grid(), 1.0);
        for _ in 0..n {
            phi = self.apply(&phi)?;
        }
        Ok(phi)
    }
}

pub fn omega_apply(op: &OmegaOp, phi: &GridFn) -> Result<GridFn> {
    op.apply(phi)
}

/// Closed form `Omega_lambda^n 1 = lambda^n (t - a)_q^(n alpha) / Gamma_q(n alpha + 1)`.
pub fn omega_power_one_closed(
    lambda: f64,
    n: usize,
    alpha: FracOrder,
    grid: &QGrid,
    a_index: usize,
    tol: &Tolerance,
) -> Result<GridFn> {
    grid.check_index(a_index)?;
    if n == 0 {
        return Ok(GridFn::constant(grid, 1.0));
    }
    let q = grid.q();
    let a = grid.point(a_index);
    let nu = n as f64 * alpha.alpha();
    let coef = lambda.powi(n as i32) / gamma_q(nu + 1.0, q, tol)?;
    let values = grid
        .points()
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            if i <= a_index {
                Ok(0.0)
            } else {
                Ok(coef * q_factorial_power(t, a, nu, q, tol)?)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    GridFn::new(grid.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::gamma_q;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn grid() -> QGrid {
        QGrid::new(0.5, 5, 8).unwrap()
    }

    #[test]
    fn derivative_of_identity_constant_and_square() {
        let g = grid();
        let id = GridFn::from_fn(&g, |t| t).unwrap();
        let c = GridFn::constant(&g, 3.0);
        let sq = GridFn::from_fn(&g, |t| t * t).unwrap();
        for i in 1..g.len() {
            assert!((nabla_derivative(&id, i).unwrap() - 1.0).abs() < 1e-14);
            assert_eq!(nabla_derivative(&c, i).unwrap(), 0.0);
        }
        // t = 1 sits at index 5
        assert!((nabla_derivative(&sq, 5).unwrap() - 1.5).abs() < 1e-14);
        assert!(matches!(nabla_derivative(&id, 0), Err(Error::Boundary(_))));
    }

    #[test]
    fn integral_of_one_telescopes() {
        let g = grid();
        let one = GridFn::constant(&g, 1.0);
        for i in 0..g.len() {
            for j in i..g.len() {
                let v = nabla_integral(&one, i, j).unwrap();
                assert!((v - (g.point(j) - g.point(i))).abs() < 1e-14);
            }
        }
        assert!(matches!(nabla_integral(&one, 3, 2), Err(Error::Argument(_))));
    }

    #[test]
    fn integral_single_point_example() {
        let g = QGrid::new(0.5, 1, 2).unwrap();
        let id = GridFn::from_fn(&g, |t| t).unwrap();
        assert!((nabla_integral(&id, 0, 1).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn integral_matches_truncated_jackson_sums() {
        // the finite sum against the two 64-term tails of the zero-based definition
        let q = 0.7;
        let g = QGrid::new(q, 4, 6).unwrap();
        let f = |t: f64| (3.0 * t).sin() + t * t;
        let jackson = |t: f64| (1.0 - q) * t * (0..64).map(|i| q.powi(i) * f(t * q.powi(i))).sum::<f64>();
        let sampled = GridFn::from_fn(&g, f).unwrap();
        for i in 0..g.len() {
            for j in i..g.len() {
                let reference = jackson(g.point(j)) - jackson(g.point(i));
                let v = nabla_integral(&sampled, i, j).unwrap();
                assert!((v - reference).abs() < 1e-9, "({i},{j}): {v} vs {reference}");
            }
        }
    }

    #[test]
    fn single_step_atom() {
        let g = grid();
        let f = GridFn::from_fn(&g, |t| 1.0 + t.ln().abs()).unwrap();
        for i in 1..g.len() {
            let t = g.point(i);
            let v = nabla_integral(&f, i - 1, i).unwrap();
            assert!((v - (t - g.q() * t) * f.get(i)).abs() <= 1e-15 * v.abs());
        }
    }

    #[test]
    fn kernel_order_one_is_plain_integral() {
        let g = grid();
        let k = build_kernel(&g, 1, FracOrder::new(1.0).unwrap(), &tol()).unwrap();
        for i in 0..g.len() {
            for j in 0..g.len() {
                let expected = if j > 1 && j <= i { 0.5 * g.point(j) } else { 0.0 };
                assert!((k.weight(i, j) - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn kernel_structure() {
        let g = QGrid::new(0.3, 6, 9).unwrap();
        for &alpha in &[0.25, 0.5, 0.9, 1.0] {
            let k = build_kernel(&g, 2, FracOrder::new(alpha).unwrap(), &tol()).unwrap();
            for i in 0..g.len() {
                for j in 0..g.len() {
                    let w = k.weight(i, j);
                    if j > i || j <= 2 {
                        assert_eq!(w, 0.0);
                    } else {
                        assert!(w > 0.0);
                    }
                }
                if i > 2 {
                    let expected = (0.7 * g.point(i)).powf(alpha);
                    assert!((k.diagonal(i) - expected).abs() <= 1e-13 * expected);
                }
            }
        }
    }

    #[test]
    fn kernel_on_one_is_power_over_gamma() {
        let g = QGrid::new(0.5, 6, 10).unwrap();
        for &alpha in &[0.3, 0.5, 0.8] {
            let order = FracOrder::new(alpha).unwrap();
            let k = build_kernel(&g, 0, order, &tol()).unwrap();
            let out = k.apply(&GridFn::constant(&g, 1.0)).unwrap();
            let a = g.point(0);
            let gamma = gamma_q(alpha + 1.0, 0.5, &tol()).unwrap();
            for i in 1..g.len() {
                let expected = q_factorial_power(g.point(i), a, alpha, 0.5, &tol()).unwrap() / gamma;
                assert!((out.get(i) - expected).abs() <= 1e-12 * expected);
            }
            assert_eq!(out.get(0), 0.0);
        }
    }

    #[test]
    fn fractional_integral_matches_straight_loop() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let q: f64 = 0.5;
        let g = QGrid::new(q, 4, 8).unwrap();
        let f = GridFn::new(g.clone(), (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let alpha = 0.5;
        let k = build_kernel(&g, 0, FracOrder::new(alpha).unwrap(), &tol()).unwrap();
        let out = fractional_integral(&f, &k).unwrap();
        // plain f64 loop: 200 factors of the product, Gamma_q from the same product at t = 1
        let qfac = |t: f64, s: f64, nu: f64| {
            let r = s / t;
            let mut p = t.powf(nu);
            for i in 0..200 {
                p *= (1.0 - r * q.powi(i)) / (1.0 - r * q.powf(i as f64 + nu));
            }
            p
        };
        let gamma = qfac(1.0, q, alpha - 1.0) / (1.0 - q).powf(alpha - 1.0);
        for i in 0..g.len() {
            let t = g.point(i);
            let mut direct = 0.0;
            for j in 1..=i {
                let s = g.point(j);
                direct += (1.0 - q) * s * qfac(t, q * s, alpha - 1.0) * f.get(j);
            }
            direct /= gamma;
            assert!((out.get(i) - direct).abs() < 1e-13, "i={i}");
        }
    }

    #[test]
    fn fractional_integral_of_zero_and_mismatch() {
        let g = grid();
        let k = build_kernel(&g, 0, FracOrder::new(0.5).unwrap(), &tol()).unwrap();
        let z = fractional_integral(&GridFn::zeros(&g), &k).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
        let other = GridFn::zeros(&QGrid::new(0.5, 4, 8).unwrap());
        assert!(matches!(fractional_integral(&other, &k), Err(Error::Argument(_))));
    }

    #[test]
    fn caputo_of_constant_vanishes_and_order_one_is_difference() {
        let g = grid();
        let c = GridFn::constant(&g, 2.0);
        let d = caputo_derivative(&c, 0, FracOrder::new(0.5).unwrap(), &tol()).unwrap();
        assert!(d.values.values().iter().all(|&v| v == 0.0));
        let f = GridFn::from_fn(&g, |t| t * t + 1.0).unwrap();
        let d1 = caputo_derivative(&f, 0, FracOrder::new(1.0).unwrap(), &tol()).unwrap();
        assert_eq!(d1.valid_from, 1);
        for i in 1..g.len() {
            assert_eq!(d1.values.get(i), nabla_derivative(&f, i).unwrap());
        }
    }

    #[test]
    fn caputo_of_linear_power() {
        let q = 0.5;
        let g = QGrid::new(q, 5, 9).unwrap();
        let a = g.point(0);
        let f = GridFn::from_fn(&g, |t| t - a).unwrap();
        let d = caputo_derivative(&f, 0, FracOrder::new(0.5).unwrap(), &tol()).unwrap();
        let gamma = gamma_q(1.5, q, &tol()).unwrap();
        for i in 1..g.len() {
            let expected = q_factorial_power(g.point(i), a, 0.5, q, &tol()).unwrap() / gamma;
            assert!((d.values.get(i) - expected).abs() <= 1e-12 * expected);
        }
    }

    #[test]
    fn caputo_needs_room_for_higher_orders() {
        let g = grid();
        let f = GridFn::from_fn(&g, |t| t * t).unwrap();
        assert!(matches!(
            caputo_derivative(&f, 0, FracOrder::new(1.5).unwrap(), &tol()),
            Err(Error::Boundary(_))
        ));
        assert!(caputo_derivative(&f, 1, FracOrder::new(1.5).unwrap(), &tol()).is_ok());
        let short = GridFn::constant(&QGrid::new(0.5, 0, 2).unwrap(), 1.0);
        assert!(matches!(
            caputo_derivative(&short, 0, FracOrder::new(2.0).unwrap(), &tol()),
            Err(Error::Boundary(_))
        ));
    }

    #[test]
    fn inverse_identity_examples() {
        let g = QGrid::new(0.5, 9, 10).unwrap();
        let c = GridFn::constant(&g, 4.0);
        assert_eq!(caputo_inverse_identity_check(&c, 0, FracOrder::new(0.5).unwrap()).unwrap(), 0.0);
        let id = GridFn::from_fn(&g, |t| t).unwrap();
        assert!(caputo_inverse_identity_check(&id, 0, FracOrder::new(0.5).unwrap()).unwrap() <= 1e-10);
        // general Taylor form for 1 < alpha < 2
        let f = GridFn::from_fn(&g, |t| (2.0 * t).cos()).unwrap();
        assert!(caputo_inverse_identity_check(&f, 1, FracOrder::new(1.4).unwrap()).unwrap() <= 1e-8);
    }

    #[test]
    fn omega_examples() {
        let q = 0.5;
        let g = QGrid::new(q, 6, 10).unwrap();
        let alpha = FracOrder::new(0.5).unwrap();
        let k = build_kernel(&g, 0, alpha, &tol()).unwrap();
        let lam = OmegaOp::new(k.clone(), GridFn::constant(&g, 0.4)).unwrap();
        for n in 0..4 {
            let iter = lam.power_on_one(n).unwrap();
            let closed = omega_power_one_closed(0.4, n, alpha, &g, 0, &tol()).unwrap();
            for i in 1..g.len() {
                assert!((iter.get(i) - closed.get(i)).abs() <= 1e-9 * closed.get(i).abs(), "n={n} i={i}");
            }
        }
        let zero = OmegaOp::new(k, GridFn::zeros(&g)).unwrap();
        let out = omega_apply(&zero, &GridFn::constant(&g, 1.0)).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn omega_closed_trivial_cases() {
        let g = QGrid::new(0.5, 3, 5).unwrap();
        let one = FracOrder::new(1.0).unwrap();
        let c0 = omega_power_one_closed(0.7, 0, one, &g, 0, &tol()).unwrap();
        assert!(c0.values().iter().all(|&v| v == 1.0));
        let c1 = omega_power_one_closed(1.0, 1, one, &g, 0, &tol()).unwrap();
        for i in 0..g.len() {
            assert!((c1.get(i) - (g.point(i) - g.point(0))).abs() < 1e-15);
        }
    }
}
