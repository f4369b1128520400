//! SART admissibility, the comparison verifier, the Gronwall bound
//! `v(a) sum_k Omega_mu^k 1`, its `alpha = 1` form and the continuous
//! dependence experiment.
//!
//! All checks run over the grid points `t >= a`.

use crate::error::{Error, Result};
use crate::operators::{OmegaOp, OperatorKernel};
use crate::qcore::compensated::CompensatedSum;
use crate::qcore::{FracOrder, GridFn, QGrid, Tolerance};
use crate::solver::{solve_marching, NonlinearIVP, DEFAULT_MAX_INNER};
use crate::special::{convergence_ratio_estimate, mittag_leffler, MLSpec};

/// Slack allowed when checking the integral inequalities themselves.
pub const HYPOTHESIS_TOL: f64 = 1e-12;

/// `1 / (t^alpha (1 - q)^alpha)`.
pub fn sart_bound(t: f64, alpha: f64, q: f64) -> f64 {
    1.0 / (t.powf(alpha) * (1.0 - q).powf(alpha))
}

/// Per point: `0 <= x <= bound` (or `< bound` when `strict`).
pub fn check_sart(x: &GridFn, alpha: FracOrder, strict: bool) -> Vec<bool> {
    let q = x.grid().q();
    x.values()
        .iter()
        .zip(x.grid().points())
        .map(|(&xi, &t)| {
            let b = sart_bound(t, alpha.alpha(), q);
            xi >= 0.0 && if strict { xi < b } else { xi <= b }
        })
        .collect()
}

fn sart_failures(x: &GridFn, alpha: FracOrder, from: usize, strict: bool) -> Vec<usize> {
    check_sart(x, alpha, strict)
        .into_iter()
        .enumerate()
        .filter(|&(i, ok)| i >= from && !ok)
        .map(|(i, _)| i)
        .collect()
}

#[derive(Debug, Clone)]
pub struct GronwallInput {
    pub v: GridFn,
    pub mu: GridFn,
    pub alpha: FracOrder,
    pub a_index: usize,
}

impl GronwallInput {
    pub fn new(v: GridFn, mu: GridFn, alpha: FracOrder, a_index: usize) -> Result<Self> {
        alpha.ensure_unit()?;
        v.grid().check_same(mu.grid())?;
        v.grid().check_index(a_index)?;
        if let Some(i) = mu.values().iter().position(|&m| m < 0.0) {
            return Err(Error::Domain(format!("mu must be nonnegative (mu[{i}] = {})", mu.get(i))));
        }
        Ok(Self { v, mu, alpha, a_index })
    }
}

#[derive(Debug, Clone)]
pub struct BoundResult {
    pub bound: GridFn,
    pub terms_used: usize,
    /// `v <= bound`, per point; points below `a` are reported as satisfied.
    pub satisfied: Vec<bool>,
    pub max_violation: f64,
    /// Sup norms of the summed terms `Omega^k 1`, starting at `k = 0`.
    pub term_norms: Vec<f64>,
}

/// `sum_k Omega^k 1`, stopping once a term's sup norm drops below `tol`.
pub fn omega_series(op: &OmegaOp, tol: f64, max_terms: usize) -> Result<(GridFn, Vec<f64>)> {
    let grid = op.kernel().grid();
    let from = op.kernel().a_index();
    let mut term = GridFn::constant(grid, 1.0);
    let mut sums: Vec<CompensatedSum> = (0..grid.len()).map(|_| CompensatedSum::new()).collect();
    for (s, &v) in sums.iter_mut().zip(term.values()) {
        s.add(v);
    }
    let mut norms = vec![1.0];
    loop {
        if norms.len() > max_terms {
            let n = norms.len();
            let ratio = norms[n - 1] / norms[n - 2];
            if ratio >= 1.0 {
                return Err(Error::Divergence {
                    ratio,
                    context: format!("Omega series terms still growing after {max_terms} terms"),
                });
            }
            return Err(Error::NotConverged { iterations: max_terms, last_delta: norms[n - 1] });
        }
        term = op.apply(&term)?;
        let norm = term.sup_norm_from(from);
        if !norm.is_finite() {
            return Err(Error::Divergence { ratio: f64::INFINITY, context: "Omega series term overflowed".into() });
        }
        if norm == 0.0 {
            break;
        }
        for (s, &v) in sums.iter_mut().zip(term.values()) {
            s.add(v);
        }
        norms.push(norm);
        if norm < tol {
            break;
        }
    }
    let values = sums.iter().map(CompensatedSum::value).collect();
    Ok((GridFn::new(grid.clone(), values)?, norms))
}

pub fn gronwall_bound(input: &GronwallInput, tol: f64, max_terms: usize) -> Result<BoundResult> {
    let a = input.a_index;
    let failures = sart_failures(&input.mu, input.alpha, a, true);
    if !failures.is_empty() {
        return Err(Error::Precondition {
            indices: failures,
            reason: "mu must satisfy 0 <= mu(t) < 1/(t^alpha (1-q)^alpha)".into(),
        });
    }
    let kernel = OperatorKernel::build(input.v.grid(), a, input.alpha, &Tolerance::default())?;
    let op = OmegaOp::new(kernel, input.mu.clone())?;
    let (series, term_norms) = omega_series(&op, tol, max_terms)?;
    let va = input.v.get(a);
    let bound = series.map(|s| va * s)?;
    let mut satisfied = vec![true; bound.len()];
    let mut max_violation: f64 = 0.0;
    for i in a..bound.len() {
        let excess = input.v.get(i) - bound.get(i);
        satisfied[i] = excess <= 0.0;
        max_violation = max_violation.max(excess);
    }
    Ok(BoundResult { bound, terms_used: term_norms.len(), satisfied, max_violation, term_norms })
}

/// Solves `u = u(a) + Omega u + offset` by marching, with `u(a) = initial`.
///
/// A nonnegative `offset` gives the `>=` inequality, a nonpositive one the
/// `<=` inequality. `offset` at and below `a` is ignored.
pub fn solve_omega_equation(op: &OmegaOp, initial: f64, offset: &GridFn) -> Result<GridFn> {
    let kernel = op.kernel();
    let grid = kernel.grid();
    grid.check_same(offset.grid())?;
    let a = kernel.a_index();
    let x = op.coefficient().values();
    let mut u = vec![initial; grid.len()];
    let mut weighted = vec![0.0; grid.len()];
    weighted[a] = x[a] * initial;
    for i in a + 1..grid.len() {
        let factor = 1.0 - kernel.diagonal(i) * x[i];
        if !(factor > 0.0) {
            return Err(Error::Step { index: i, reason: format!("diagonal factor {factor} is not positive") });
        }
        u[i] = (initial + kernel.history(i, &weighted) + offset.get(i)) / factor;
        weighted[i] = x[i] * u[i];
    }
    GridFn::new(grid.clone(), u)
}

#[derive(Debug, Clone)]
pub struct ComparisonInput {
    pub w: GridFn,
    pub v: GridFn,
    pub x: GridFn,
    pub alpha: FracOrder,
    pub a_index: usize,
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    /// `w >= w(a) + Omega_x w`.
    pub w_inequality: bool,
    /// `v <= v(a) + Omega_x v`.
    pub v_inequality: bool,
    pub sart: bool,
    /// `w(a) >= v(a)`.
    pub initial_order: bool,
    /// `Some(w >= v - tol everywhere)` when all hypotheses hold.
    pub conclusion: Option<bool>,
    pub max_violation: f64,
    /// The weight `(1-q)^alpha t^alpha x(t)` isolated at each step.
    pub diagonal_weights: Vec<f64>,
    /// Max relative gap between the kernel diagonal and its closed form.
    pub diagonal_identity_error: f64,
}

impl ComparisonReport {
    pub fn hypotheses_hold(&self) -> bool {
        self.w_inequality && self.v_inequality && self.sart && self.initial_order
    }
}

pub fn verify_comparison(input: &ComparisonInput, tol: f64) -> Result<ComparisonReport> {
    let grid = input.w.grid();
    grid.check_same(input.v.grid())?;
    grid.check_same(input.x.grid())?;
    let a = input.a_index;
    let kernel = OperatorKernel::build(grid, a, input.alpha, &Tolerance::default())?;
    let op = OmegaOp::new(kernel, input.x.clone())?;
    let ow = op.apply(&input.w)?;
    let ov = op.apply(&input.v)?;
    let (wa, va) = (input.w.get(a), input.v.get(a));

    let mut w_inequality = true;
    let mut v_inequality = true;
    for i in a..grid.len() {
        let rw = wa + ow.get(i);
        let rv = va + ov.get(i);
        w_inequality &= input.w.get(i) >= rw - HYPOTHESIS_TOL * rw.abs().max(1.0);
        v_inequality &= input.v.get(i) <= rv + HYPOTHESIS_TOL * rv.abs().max(1.0);
    }
    let sart = sart_failures(&input.x, input.alpha, a, false).is_empty();
    let initial_order = wa >= va;

    let q = grid.q();
    let alpha = input.alpha.alpha();
    let mut diagonal_weights = vec![0.0; grid.len()];
    let mut diagonal_identity_error: f64 = 0.0;
    for i in a + 1..grid.len() {
        let t = grid.point(i);
        let closed = (1.0 - q).powf(alpha) * t.powf(alpha) * input.x.get(i);
        let isolated = op.kernel().diagonal(i) * input.x.get(i);
        diagonal_weights[i] = isolated;
        if closed != 0.0 {
            diagonal_identity_error = diagonal_identity_error.max(((isolated - closed) / closed).abs());
        }
    }

    let max_violation = (a..grid.len()).map(|i| input.v.get(i) - input.w.get(i)).fold(0.0, f64::max);
    let mut report = ComparisonReport {
        w_inequality,
        v_inequality,
        sart,
        initial_order,
        conclusion: None,
        max_violation,
        diagonal_weights,
        diagonal_identity_error,
    };
    if report.hypotheses_hold() {
        report.conclusion = Some(max_violation <= tol);
    }
    Ok(report)
}

/// `prod_{a < s <= t} 1 / (1 - (1-q) s delta(s))`, the nabla q-exponential.
pub fn nabla_q_exponential(delta: &GridFn, a_index: usize) -> Result<GridFn> {
    let grid = delta.grid();
    grid.check_index(a_index)?;
    let q = grid.q();
    let mut values = vec![1.0; grid.len()];
    for i in a_index + 1..grid.len() {
        let factor = 1.0 - (1.0 - q) * grid.point(i) * delta.get(i);
        if !(factor > 0.0) {
            return Err(Error::Domain(format!("nabla q-exponential factor {factor} at index {i} is not positive")));
        }
        values[i] = values[i - 1] / factor;
    }
    GridFn::new(grid.clone(), values)
}

#[derive(Debug, Clone)]
pub struct ClassicalBound {
    pub series: BoundResult,
    /// `v(a)` times the nabla q-exponential in product form.
    pub product: GridFn,
    /// `v(a) E_1(delta, t - a)` when `delta` is constant on `t >= a`.
    pub closed_form: Option<GridFn>,
    /// Max relative gap between the series and the other forms.
    pub max_discrepancy: f64,
}

pub fn q_gronwall_classical(v: &GridFn, delta: &GridFn, a_index: usize, tol: f64) -> Result<ClassicalBound> {
    let grid = v.grid();
    let q = grid.q();
    let over: Vec<usize> = (a_index..grid.len()).filter(|&i| !(delta.get(i) < 1.0 / (1.0 - q))).collect();
    if !over.is_empty() {
        return Err(Error::Precondition { indices: over, reason: "delta must satisfy delta(t) < 1/(1-q)".into() });
    }
    let one = FracOrder::new(1.0)?;
    let input = GronwallInput::new(v.clone(), delta.clone(), one, a_index)?;
    let series = gronwall_bound(&input, tol, Tolerance::default().max_terms)?;
    let va = v.get(a_index);
    let product = nabla_q_exponential(delta, a_index)?.map(|e| va * e)?;

    let d = delta.get(a_index);
    let constant = delta.values()[a_index..].iter().all(|&x| x == d);
    let closed_form = if constant {
        let spec = MLSpec::new(1.0, 1.0, d, grid.point(a_index))?;
        let mut values = vec![va; grid.len()];
        for i in a_index + 1..grid.len() {
            values[i] = va * mittag_leffler(&spec, grid.point(i), q)?.value;
        }
        Some(GridFn::new(grid.clone(), values)?)
    } else {
        None
    };

    let rel = |x: f64, y: f64| if x == y { 0.0 } else { (x - y).abs() / x.abs().max(y.abs()) };
    let mut max_discrepancy: f64 = 0.0;
    for i in a_index..grid.len() {
        max_discrepancy = max_discrepancy.max(rel(series.bound.get(i), product.get(i)));
        if let Some(c) = &closed_form {
            max_discrepancy = max_discrepancy.max(rel(series.bound.get(i), c.get(i)));
        }
    }
    Ok(ClassicalBound { series, product, closed_form, max_discrepancy })
}

#[derive(Debug, Clone)]
pub struct DependenceSetup {
    pub grid: QGrid,
    pub alpha: FracOrder,
    pub a_index: usize,
    pub gamma: f64,
    pub beta: f64,
    pub lipschitz: f64,
    pub tol: f64,
    /// Number of perturbed initial values `gamma + 10^-n`, `n = 1..=sequence_len`.
    pub sequence_len: usize,
}

#[derive(Debug, Clone)]
pub struct DependenceRow {
    pub t: f64,
    pub phi: f64,
    pub psi: f64,
    pub abs_diff: f64,
    pub bound: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone)]
pub struct DependenceReport {
    pub rows: Vec<DependenceRow>,
    /// `|gamma - beta|` times the Omega series; should equal the `bound` column.
    pub series_bound: GridFn,
    pub series_vs_closed: f64,
    pub satisfied: bool,
    pub perturbations: Vec<f64>,
    pub sup_diffs: Vec<f64>,
    pub sequence_bounds: Vec<f64>,
    pub monotone: bool,
    pub sequence_within_bound: bool,
}

pub fn dependence_experiment<F: Fn(f64, f64) -> f64>(setup: &DependenceSetup, rhs: F) -> Result<DependenceReport> {
    let DependenceSetup { grid, alpha, a_index, gamma, beta, lipschitz, tol, sequence_len } = setup.clone();
    if !(0.0..1.0).contains(&lipschitz) {
        return Err(Error::Domain(format!("Lipschitz constant must satisfy 0 <= L < 1 (got {lipschitz})")));
    }
    let q = grid.q();
    let a = grid.point(a_index);
    let ratio = convergence_ratio_estimate(alpha.alpha(), q, grid.last(), a, lipschitz);
    if ratio >= 1.0 {
        return Err(Error::Divergence { ratio, context: "Mittag-Leffler bound at the last grid point".into() });
    }
    let solve = |y0: f64| -> Result<GridFn> {
        let p = NonlinearIVP::new(grid.clone(), alpha, a_index, y0, &rhs, lipschitz)?;
        Ok(solve_marching(&p, 1e-15, DEFAULT_MAX_INNER)?.solution)
    };
    let phi = solve(gamma)?;
    let psi = solve(beta)?;

    let spec = MLSpec::new(alpha.alpha(), 1.0, lipschitz, a)?;
    let growth = |i: usize| -> Result<f64> {
        if i <= a_index {
            Ok(1.0)
        } else {
            Ok(mittag_leffler(&spec, grid.point(i), q)?.value)
        }
    };
    let gap = (gamma - beta).abs();
    let mut rows = Vec::with_capacity(grid.len() - a_index);
    for i in a_index..grid.len() {
        let abs_diff = (phi.get(i) - psi.get(i)).abs();
        let bound = gap * growth(i)?;
        rows.push(DependenceRow {
            t: grid.point(i),
            phi: phi.get(i),
            psi: psi.get(i),
            abs_diff,
            bound,
            satisfied: abs_diff <= bound + tol,
        });
    }
    let satisfied = rows.iter().all(|r| r.satisfied);

    let kernel = OperatorKernel::build(&grid, a_index, alpha, &Tolerance::default())?;
    let op = OmegaOp::new(kernel, GridFn::constant(&grid, lipschitz))?;
    let (series, _) = omega_series(&op, 1e-17, Tolerance::default().max_terms)?;
    let series_bound = series.map(|s| gap * s)?;
    let series_vs_closed = rows
        .iter()
        .zip(a_index..)
        .map(|(r, i)| {
            let s = series_bound.get(i);
            if s == r.bound { 0.0 } else { (s - r.bound).abs() / s.abs().max(r.bound.abs()) }
        })
        .fold(0.0, f64::max);

    let top = growth(grid.len() - 1)?;
    let mut perturbations = Vec::with_capacity(sequence_len);
    let mut sup_diffs = Vec::with_capacity(sequence_len);
    let mut sequence_bounds = Vec::with_capacity(sequence_len);
    for n in 1..=sequence_len {
        let gamma_n = gamma + 10f64.powi(-(n as i32));
        let phi_n = solve(gamma_n)?;
        let delta = (gamma - gamma_n).abs();
        perturbations.push(delta);
        sup_diffs.push(phi.sup_distance_from(&phi_n, a_index)?);
        sequence_bounds.push(delta * top);
    }
    let monotone = sup_diffs.windows(2).all(|w| w[1] < w[0]);
    let sequence_within_bound = sup_diffs.iter().zip(&sequence_bounds).all(|(d, b)| *d <= b + tol);

    Ok(DependenceReport {
        rows,
        series_bound,
        series_vs_closed,
        satisfied,
        perturbations,
        sup_diffs,
        sequence_bounds,
        monotone,
        sequence_within_bound,
    })
}
