//! Caputo q-fractional initial value problems of order `0 < alpha <= 1`.
//!
//! Every solver targets the equivalent summation equation
//! `y(t) = y(a) + I^alpha[f(., y)](t)` on the grid points `t >= a`. Entries
//! below the initial point carry `y(a)`.

use crate::error::{Error, Result};
use crate::operators::OperatorKernel;
use crate::qcore::compensated::sum;
use crate::qcore::{q_factorial_power, FracOrder, GridFn, QGrid, Tolerance};
use crate::special::{convergence_ratio_estimate, mittag_leffler, mittag_leffler_modified, MLSpec};

pub const DEFAULT_MAX_INNER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ClosedForm,
    ClosedFormModified,
    SuccessiveApproximation,
    Marching,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: GridFn,
    pub iterations: usize,
    /// Max absolute defect of the summation equation over `t >= a`.
    pub residual: f64,
    pub method: Method,
}

/// `C^alpha y = lambda y + f(t)`, `y(a) = y0`.
#[derive(Debug, Clone)]
pub struct LinearIVP {
    pub alpha: FracOrder,
    pub lambda: f64,
    pub a_index: usize,
    pub y0: f64,
    pub forcing: GridFn,
}

impl LinearIVP {
    pub fn new(alpha: FracOrder, lambda: f64, a_index: usize, y0: f64, forcing: GridFn) -> Result<Self> {
        alpha.ensure_unit()?;
        forcing.grid().check_index(a_index)?;
        Ok(Self { alpha, lambda, a_index, y0, forcing })
    }

    pub fn grid(&self) -> &QGrid {
        self.forcing.grid()
    }

    fn check_convergence(&self) -> Result<()> {
        let grid = self.grid();
        let ratio = convergence_ratio_estimate(
            self.alpha.alpha(),
            grid.q(),
            grid.last(),
            grid.point(self.a_index),
            self.lambda,
        );
        if ratio >= 1.0 {
            return Err(Error::Divergence {
                ratio,
                context: format!("Mittag-Leffler series at the last grid point t = {}", grid.last()),
            });
        }
        Ok(())
    }

    /// Max defect of `y = y0 + lambda I^alpha y + I^alpha f`.
    pub fn defect(&self, kernel: &OperatorKernel, y: &GridFn) -> Result<f64> {
        let iy = kernel.apply(y)?;
        let ifo = kernel.apply(&self.forcing)?;
        Ok((self.a_index..y.len())
            .map(|i| (y.get(i) - self.y0 - self.lambda * iy.get(i) - ifo.get(i)).abs())
            .fold(0.0, f64::max))
    }
}

/// `C^alpha y = f(t, y)`, `y(a) = y0`, with `f` Lipschitz in `y` with constant `lipschitz`.
#[derive(Debug, Clone)]
pub struct NonlinearIVP<F> {
    pub grid: QGrid,
    pub alpha: FracOrder,
    pub a_index: usize,
    pub y0: f64,
    pub rhs: F,
    pub lipschitz: f64,
}

impl<F: Fn(f64, f64) -> f64> NonlinearIVP<F> {
    pub fn new(grid: QGrid, alpha: FracOrder, a_index: usize, y0: f64, rhs: F, lipschitz: f64) -> Result<Self> {
        alpha.ensure_unit()?;
        grid.check_index(a_index)?;
        if !(lipschitz >= 0.0) {
            return Err(Error::Domain(format!("Lipschitz constant {lipschitz} must be nonnegative")));
        }
        Ok(Self { grid, alpha, a_index, y0, rhs, lipschitz })
    }
}

fn closed_form(p: &LinearIVP, tol: &Tolerance, modified: bool) -> Result<SolveReport> {
    p.check_convergence()?;
    let grid = p.grid();
    let q = grid.q();
    let alpha = p.alpha.alpha();
    let a_index = p.a_index;
    let a = grid.point(a_index);
    let kernel = OperatorKernel::build(grid, a_index, p.alpha, tol)?;
    let free = MLSpec::new(alpha, 1.0, p.lambda, a)?.with_tol(*tol);
    let mut values = vec![p.y0; grid.len()];
    for i in a_index + 1..grid.len() {
        let t = grid.point(i);
        let homogeneous = p.y0 * mittag_leffler(&free, t, q)?.value;
        let mut forced = Vec::with_capacity(i - a_index);
        for j in a_index + 1..=i {
            let f = p.forcing.get(j);
            if f == 0.0 {
                continue;
            }
            let s = grid.point(j);
            let weight = if modified {
                let spec = MLSpec::new(alpha, alpha, p.lambda, q * s)?.with_tol(*tol);
                mittag_leffler_modified(&spec, t, q)?.value
            } else {
                let spec = MLSpec::new(alpha, alpha, p.lambda, q.powf(alpha) * s)?.with_tol(*tol);
                q_factorial_power(t, q * s, alpha - 1.0, q, tol)? * mittag_leffler(&spec, t, q)?.value
            };
            forced.push((1.0 - q) * s * weight * f);
        }
        values[i] = homogeneous + sum(forced);
    }
    let solution = GridFn::new(grid.clone(), values)?;
    let residual = p.defect(&kernel, &solution)?;
    let method = if modified { Method::ClosedFormModified } else { Method::ClosedForm };
    Ok(SolveReport { solution, iterations: 0, residual, method })
}

/// `y(t) = y0 E_alpha(lambda, t - a) + int_a^t (t - qs)_q^(alpha - 1) E_{alpha,alpha}(lambda, t - q^alpha s) f(s) nabla_q s`.
pub fn solve_linear_closed(p: &LinearIVP, tol: &Tolerance) -> Result<SolveReport> {
    closed_form(p, tol, false)
}

/// The same solution through the modified functions:
/// `y(t) = y0 e_alpha(lambda, t - a) + int_a^t e_{alpha,alpha}(lambda, t - qs) f(s) nabla_q s`.
pub fn solve_linear_closed_modified(p: &LinearIVP, tol: &Tolerance) -> Result<SolveReport> {
    closed_form(p, tol, true)
}

/// Successive approximations `y_0 = y0`, `y_m = y0 + lambda I^alpha y_(m-1) + I^alpha f`.
pub struct SuccessiveApproximations {
    kernel: OperatorKernel,
    lambda: f64,
    base: Vec<f64>,
    current: Vec<f64>,
}

impl SuccessiveApproximations {
    pub fn new(p: &LinearIVP, tol: &Tolerance) -> Result<Self> {
        let kernel = OperatorKernel::build(p.grid(), p.a_index, p.alpha, tol)?;
        let forced = kernel.apply(&p.forcing)?;
        let base: Vec<f64> = forced.values().iter().map(|v| p.y0 + v).collect();
        let current = vec![p.y0; base.len()];
        Ok(Self { kernel, lambda: p.lambda, base, current })
    }

    pub fn kernel(&self) -> &OperatorKernel {
        &self.kernel
    }

    pub fn current(&self) -> Result<GridFn> {
        GridFn::new(self.kernel.grid().clone(), self.current.clone())
    }

    /// Advances to the next iterate and returns the sup-norm change.
    pub fn step(&mut self) -> f64 {
        let applied = self.kernel.apply_slice(&self.current);
        let mut change: f64 = 0.0;
        for (i, (y, b)) in self.current.iter_mut().zip(&self.base).enumerate() {
            let next = b + self.lambda * applied[i];
            change = change.max((next - *y).abs());
            *y = next;
        }
        change
    }
}

impl Iterator for SuccessiveApproximations {
    type Item = Result<GridFn>;

    fn next(&mut self) -> Option<Self::Item> {
        self.step();
        Some(self.current())
    }
}

/// Iterates until the defect of the current iterate (the size of the next
/// change) drops below `tol`.
pub fn solve_linear_iterative(p: &LinearIVP, max_iter: usize, tol: f64) -> Result<SolveReport> {
    let mut iterates = SuccessiveApproximations::new(p, &Tolerance::default())?;
    let kernel = iterates.kernel.clone();
    let mut previous = iterates.current.clone();
    let mut last = f64::INFINITY;
    for m in 1..=max_iter {
        iterates.step();
        let diff: Vec<f64> = iterates.current.iter().zip(&previous).map(|(a, b)| a - b).collect();
        let defect = kernel.apply_slice(&diff).iter().map(|v| (p.lambda * v).abs()).fold(0.0, f64::max);
        last = defect;
        if defect < tol {
            let solution = iterates.current()?;
            let residual = p.defect(&kernel, &solution)?;
            return Ok(SolveReport { solution, iterations: m, residual, method: Method::SuccessiveApproximation });
        }
        previous.clone_from(&iterates.current);
    }
    Err(Error::NotConverged { iterations: max_iter, last_delta: last })
}

struct Marched {
    values: Vec<f64>,
    inner_iterations: usize,
    residual: f64,
}

/// Solves `y = y0 + I^alpha[rhs(i, t, y)]` point by point in increasing `t`.
fn march<F: Fn(usize, f64, f64) -> f64>(
    kernel: &OperatorKernel,
    y0: f64,
    lipschitz: f64,
    rhs: F,
    tol: f64,
    max_inner: usize,
) -> Result<Marched> {
    let grid = kernel.grid();
    let a_index = kernel.a_index();
    let n = grid.len();

    let blocked: Vec<usize> = (a_index + 1..n).filter(|&i| lipschitz * kernel.diagonal(i) >= 1.0).collect();
    if !blocked.is_empty() {
        return Err(Error::Precondition {
            indices: blocked,
            reason: "L (1-q)^alpha t^alpha >= 1: the implicit step may not be solvable".into(),
        });
    }

    let mut y = vec![y0; n];
    let mut fvals = vec![0.0; n];
    let mut inner_iterations = 0;
    fvals[a_index] = rhs(a_index, grid.point(a_index), y0);
    for i in a_index + 1..n {
        let t = grid.point(i);
        let known = y0 + kernel.history(i, &fvals);
        let d = kernel.diagonal(i);
        let mut yi = y[i - 1];
        let mut damping = 1.0;
        let mut prev_delta = f64::INFINITY;
        let mut converged = false;
        for _ in 0..max_inner {
            inner_iterations += 1;
            let update = known + d * rhs(i, t, yi);
            let delta = update - yi;
            if !delta.is_finite() {
                return Err(Error::Step { index: i, reason: "non-finite iterate".into() });
            }
            if delta.abs() <= tol * yi.abs().max(1.0) {
                yi = update;
                converged = true;
                break;
            }
            if delta.abs() >= prev_delta {
                damping = 0.5;
            }
            prev_delta = delta.abs();
            yi += damping * delta;
        }
        if !converged {
            return Err(Error::Step { index: i, reason: format!("no fixed point within {max_inner} iterations") });
        }
        y[i] = yi;
        fvals[i] = rhs(i, t, yi);
    }

    let integral = kernel.apply_slice(&fvals);
    let residual = (a_index..n).map(|i| (y[i] - y0 - integral[i]).abs()).fold(0.0, f64::max);
    Ok(Marched { values: y, inner_iterations, residual })
}

/// Grid-marching solve of a nonlinear problem; only the diagonal term is implicit.
pub fn solve_marching<F: Fn(f64, f64) -> f64>(p: &NonlinearIVP<F>, tol: f64, max_inner: usize) -> Result<SolveReport> {
    let kernel = OperatorKernel::build(&p.grid, p.a_index, p.alpha, &Tolerance::default())?;
    let marched = march(&kernel, p.y0, p.lipschitz, |_, t, y| (p.rhs)(t, y), tol, max_inner)?;
    Ok(SolveReport {
        solution: GridFn::new(p.grid.clone(), marched.values)?,
        iterations: marched.inner_iterations,
        residual: marched.residual,
        method: Method::Marching,
    })
}

/// Grid-marching solve of a linear problem, `f(t, y) = lambda y + forcing(t)`.
pub fn solve_linear_marching(p: &LinearIVP, tol: f64, max_inner: usize) -> Result<SolveReport> {
    let kernel = OperatorKernel::build(p.grid(), p.a_index, p.alpha, &Tolerance::default())?;
    let forcing = p.forcing.values();
    let marched = march(&kernel, p.y0, p.lambda.abs(), |i, _, y| p.lambda * y + forcing[i], tol, max_inner)?;
    let solution = GridFn::new(p.grid().clone(), marched.values)?;
    Ok(SolveReport { solution, iterations: marched.inner_iterations, residual: marched.residual, method: Method::Marching })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{caputo_derivative, omega_power_one_closed};
    use crate::special::mittag_leffler;

    fn grid(q: f64) -> QGrid {
        QGrid::new(q, 11, 12).unwrap()
    }

    fn linear(q: f64, alpha: f64, lambda: f64, forcing: impl Fn(f64) -> f64) -> LinearIVP {
        let g = grid(q);
        LinearIVP::new(FracOrder::new(alpha).unwrap(), lambda, 0, 1.5, GridFn::from_fn(&g, forcing).unwrap()).unwrap()
    }

    #[test]
    fn closed_form_trivial_cases() {
        let p = linear(0.5, 0.5, 0.0, |_| 0.0);
        let r = solve_linear_closed(&p, &Tolerance::default()).unwrap();
        assert!(r.solution.values().iter().all(|&v| v == 1.5));
        assert_eq!(r.residual, 0.0);

        let p = linear(0.5, 0.5, 0.0, |t| t.sin());
        let r = solve_linear_closed(&p, &Tolerance::default()).unwrap();
        let kernel = OperatorKernel::build(p.grid(), 0, p.alpha, &Tolerance::default()).unwrap();
        let expected = kernel.apply(&p.forcing).unwrap();
        for i in 0..12 {
            assert!((r.solution.get(i) - 1.5 - expected.get(i)).abs() < 1e-14);
        }
    }

    #[test]
    fn closed_form_order_one_is_q_exponential() {
        let q = 0.5;
        let p = linear(q, 1.0, 1.0, |_| 0.0);
        let r = solve_linear_closed(&p, &Tolerance::default()).unwrap();
        let a = p.grid().point(0);
        let spec = MLSpec::new(1.0, 1.0, 1.0, a).unwrap();
        for (i, &t) in p.grid().points().iter().enumerate().skip(1) {
            let e = mittag_leffler(&spec, t, q).unwrap().value;
            assert!((r.solution.get(i) - 1.5 * e).abs() < 1e-13);
        }
        assert!(r.residual < 1e-12);
    }

    #[test]
    fn closed_form_refuses_divergent_grid() {
        // t up to 2^6 with lambda = 0.4: 0.4 * (64 * 0.5)^0.5 > 1
        let g = QGrid::new(0.5, 5, 12).unwrap();
        let p = LinearIVP::new(FracOrder::new(0.5).unwrap(), 0.4, 0, 1.0, GridFn::zeros(&g)).unwrap();
        assert!(matches!(solve_linear_closed(&p, &Tolerance::default()), Err(Error::Divergence { .. })));
    }

    #[test]
    fn first_iterate_matches_display() {
        let q = 0.5;
        let p = linear(q, 0.5, 0.4, |t| 1.0 + t);
        let mut it = SuccessiveApproximations::new(&p, &Tolerance::default()).unwrap();
        let y1 = it.next().unwrap().unwrap();
        let one = omega_power_one_closed(0.4, 1, p.alpha, p.grid(), 0, &Tolerance::default()).unwrap();
        let forced = it.kernel().apply(&p.forcing).unwrap();
        for i in 0..12 {
            let expected = 1.5 * (1.0 + one.get(i)) + forced.get(i);
            assert!((y1.get(i) - expected).abs() < 1e-12, "i={i}");
        }
    }

    #[test]
    fn iterative_converges_at_once_without_coupling() {
        let p = linear(0.5, 0.5, 0.0, |t| t);
        let r = solve_linear_iterative(&p, 10, 1e-14).unwrap();
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn iterative_reports_non_convergence() {
        let p = linear(0.5, 0.5, 0.4, |_| 0.0);
        assert!(matches!(solve_linear_iterative(&p, 2, 1e-14), Err(Error::NotConverged { iterations: 2, .. })));
    }

    #[test]
    fn methods_agree_on_homogeneous_problem() {
        let p = linear(0.5, 0.5, 0.4, |_| 0.0);
        let closed = solve_linear_closed(&p, &Tolerance::default()).unwrap();
        let iter = solve_linear_iterative(&p, 500, 1e-14).unwrap();
        let march = solve_linear_marching(&p, 1e-14, DEFAULT_MAX_INNER).unwrap();
        assert!(closed.solution.sup_distance_from(&iter.solution, 0).unwrap() <= 1e-8);
        assert!(closed.solution.sup_distance_from(&march.solution, 0).unwrap() <= 1e-8);
    }

    #[test]
    fn modified_representation_agrees() {
        let p = linear(0.3, 0.7, -0.3, |t| (2.0 * t).cos());
        let a = solve_linear_closed(&p, &Tolerance::default()).unwrap();
        let b = solve_linear_closed_modified(&p, &Tolerance::default()).unwrap();
        assert!(a.solution.sup_distance_from(&b.solution, 0).unwrap() < 1e-12);
        assert!(a.residual < 1e-12 && b.residual < 1e-12);
    }

    #[test]
    fn marching_trivial_and_nonlinear() {
        let g = grid(0.5);
        let alpha = FracOrder::new(0.5).unwrap();
        let zero = NonlinearIVP::new(g.clone(), alpha, 0, 0.7, |_, _| 0.0, 0.0).unwrap();
        let r = solve_marching(&zero, 1e-12, DEFAULT_MAX_INNER).unwrap();
        assert!(r.solution.values().iter().all(|&v| v == 0.7));
        assert_eq!(r.residual, 0.0);

        let sine = NonlinearIVP::new(g, alpha, 0, 1.0, |_, y: f64| 0.5 * y.sin(), 0.5).unwrap();
        let r = solve_marching(&sine, 1e-13, DEFAULT_MAX_INNER).unwrap();
        assert!(r.residual <= 1e-10, "residual {}", r.residual);
    }

    #[test]
    fn marching_checks_diagonal_solvability() {
        let g = QGrid::new(0.5, 0, 6).unwrap();
        let p = NonlinearIVP::new(g, FracOrder::new(1.0).unwrap(), 0, 1.0, |_, y| 0.5 * y, 0.5).unwrap();
        match solve_marching(&p, 1e-12, DEFAULT_MAX_INNER) {
            Err(Error::Precondition { indices, .. }) => assert_eq!(indices, vec![2, 3, 4, 5]),
            other => panic!("expected precondition failure, got {other:?}"),
        }
    }

    #[test]
    fn marching_step_failure_carries_index() {
        let g = grid(0.5);
        // declared Lipschitz constant understates the real one, so the inner iteration diverges
        let p = NonlinearIVP::new(g, FracOrder::new(0.9).unwrap(), 0, 1.0, |_, y: f64| 40.0 * y, 0.1).unwrap();
        assert!(matches!(solve_marching(&p, 1e-12, 50), Err(Error::Step { .. })));
    }

    #[test]
    fn caputo_of_marched_solution_recovers_rhs() {
        let p = linear(0.5, 0.9, 0.2, |t| t * t);
        let r = solve_linear_marching(&p, 1e-14, DEFAULT_MAX_INNER).unwrap();
        let c = caputo_derivative(&r.solution, 0, p.alpha, &Tolerance::default()).unwrap();
        for i in 1..12 {
            let expected = 0.2 * r.solution.get(i) + p.forcing.get(i);
            assert!((c.values.get(i) - expected).abs() <= 1e-6, "i={i}");
        }
    }

    #[test]
    fn solvers_reject_orders_above_one() {
        let g = grid(0.5);
        assert!(LinearIVP::new(FracOrder::new(1.2).unwrap(), 0.1, 0, 1.0, GridFn::zeros(&g)).is_err());
        assert!(NonlinearIVP::new(g, FracOrder::new(1.2).unwrap(), 0, 1.0, |_, y| y, 1.0).is_err());
    }
}
