//! Seeded verification suites. Reports are JSON with sorted keys and
//! failures ordered by case id, so a given (suite, seed, cases) always
//! prints the same bytes.

use std::collections::BTreeMap;

use clap::{Args, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use qfrac::gronwall::{
    dependence_experiment, gronwall_bound, q_gronwall_classical, sart_bound, solve_omega_equation, verify_comparison,
    ComparisonInput, DependenceSetup, GronwallInput,
};
use qfrac::operators::{build_kernel, caputo_inverse_identity_check, fractional_integral, OmegaOp};
use qfrac::qcore::{gamma_q, q_bracket, q_factorial_power};
use qfrac::solver::{solve_linear_closed, solve_linear_iterative, solve_linear_marching, LinearIVP, DEFAULT_MAX_INNER};
use qfrac::special::{mittag_leffler_terms, MLSpec};
use qfrac::{FracOrder, GridFn, QGrid, Tolerance};

use crate::{CliError, Outcome, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum Suite {
    Lemma1,
    Gamma,
    Power,
    Lemma2,
    Solver,
    Ratio,
    Gronwall,
    Comparison,
    Classical,
    Dependence,
    All,
}

impl Suite {
    const EACH: [Suite; 10] = [
        Suite::Lemma1,
        Suite::Gamma,
        Suite::Power,
        Suite::Lemma2,
        Suite::Solver,
        Suite::Ratio,
        Suite::Gronwall,
        Suite::Comparison,
        Suite::Classical,
        Suite::Dependence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Lemma1 => "lemma1",
            Suite::Gamma => "gamma",
            Suite::Power => "power",
            Suite::Lemma2 => "lemma2",
            Suite::Solver => "solver",
            Suite::Ratio => "ratio",
            Suite::Gronwall => "gronwall",
            Suite::Comparison => "comparison",
            Suite::Classical => "classical",
            Suite::Dependence => "dependence",
            Suite::All => "all",
        }
    }

    fn default_cases(self) -> usize {
        match self {
            Suite::Lemma1 | Suite::Lemma2 => 20,
            Suite::Gronwall | Suite::Comparison => 200,
            Suite::Classical => 50,
            _ => 0,
        }
    }
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(value_enum)]
    pub suite: Suite,
    /// Random cases for the randomized suites (default: per suite)
    #[arg(long)]
    pub cases: Option<usize>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Failure {
    pub case: usize,
    pub property: String,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Report {
    pub suite: String,
    pub seed: u64,
    pub cases: usize,
    pub failures: Vec<Failure>,
    pub max_errors_by_property: BTreeMap<String, f64>,
}

#[derive(Default)]
struct Recorder {
    next_case: usize,
    failures: Vec<Failure>,
    max_errors: BTreeMap<String, f64>,
}

impl Recorder {
    fn case(&mut self) -> usize {
        self.next_case += 1;
        self.next_case - 1
    }

    /// Records `err` for `property`; a NaN error or one above `limit` is a failure.
    fn check(&mut self, case: usize, property: &str, err: f64, limit: f64) {
        let slot = self.max_errors.entry(property.to_string()).or_insert(0.0);
        if err > *slot || err.is_nan() {
            *slot = err;
        }
        if !(err <= limit) {
            self.fail(case, property, format!("error {err:e} exceeds {limit:e}"));
        }
    }

    fn fail(&mut self, case: usize, property: &str, detail: String) {
        self.failures.push(Failure { case, property: property.to_string(), detail });
    }

    fn require(&mut self, case: usize, property: &str, ok: bool, detail: impl FnOnce() -> String) {
        self.max_errors.entry(property.to_string()).or_insert(0.0);
        if !ok {
            self.fail(case, property, detail());
        }
    }

    /// Runs `f`, turning an error into a failure of `property`.
    fn guard(&mut self, case: usize, property: &str, f: impl FnOnce(&mut Self) -> qfrac::Result<()>) {
        if let Err(e) = f(self) {
            self.fail(case, property, format!("error: {e}"));
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn suite_rng(seed: u64, suite: Suite) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(suite as u64 + 1);
    rng
}

fn order(alpha: f64) -> qfrac::Result<FracOrder> {
    FracOrder::new(alpha)
}

fn tol() -> Tolerance {
    Tolerance::default()
}

fn lemma1(rec: &mut Recorder, rng: &mut ChaCha8Rng, pairs: usize) {
    let params = [0.25, 0.5, 1.3];
    for &q in &[0.3f64, 0.5, 0.9] {
        for &b in &params {
            for &g in &params {
                for _ in 0..pairs {
                    let case = rec.case();
                    let n: i32 = rng.gen_range(-3..8);
                    let m: i32 = rng.gen_range(1..7);
                    let t = q.powi(n);
                    let s = t * q.powi(m);
                    rec.guard(case, "lemma1", |rec| {
                        let whole = q_factorial_power(t, s, b + g, q, &tol())?;
                        let split = q_factorial_power(t, s, b, q, &tol())? * q_factorial_power(t, q.powf(b) * s, g, q, &tol())?;
                        rec.check(case, "lemma1.I", rel(whole, split), 1e-10);

                        for &c in &[q, 1.0 / q, 2.0] {
                            let lhs = q_factorial_power(c * t, c * s, b, q, &tol())?;
                            let rhs = c.powf(b) * q_factorial_power(t, s, b, q, &tol())?;
                            rec.check(case, "lemma1.II", rel(lhs, rhs), 1e-10);
                        }

                        // derivatives taken along the grid through t and s
                        let bracket = q_bracket(b, q)?;
                        let dt = (q_factorial_power(t, s, b, q, &tol())? - q_factorial_power(q * t, s, b, q, &tol())?)
                            / ((1.0 - q) * t);
                        let want = bracket * q_factorial_power(t, s, b - 1.0, q, &tol())?;
                        rec.check(case, "lemma1.III", rel(dt, want), 1e-10);

                        let ds = (q_factorial_power(t, s, b, q, &tol())? - q_factorial_power(t, q * s, b, q, &tol())?)
                            / ((1.0 - q) * s);
                        let want = -bracket * q_factorial_power(t, q * s, b - 1.0, q, &tol())?;
                        rec.check(case, "lemma1.IV", rel(ds, want), 1e-10);
                        Ok(())
                    });
                }
            }
        }
    }
}

fn gamma(rec: &mut Recorder) {
    for &q in &[0.3, 0.5, 0.9] {
        for &a in &[0.3, 0.5, 1.7, 2.4] {
            let case = rec.case();
            rec.guard(case, "gamma.recurrence", |rec| {
                let lhs = gamma_q(a + 1.0, q, &tol())?;
                let rhs = q_bracket(a, q)? * gamma_q(a, q, &tol())?;
                rec.check(case, "gamma.recurrence", rel(lhs, rhs), 1e-10);
                Ok(())
            });
        }
        let mut factorial = 1.0;
        for n in 0..=10usize {
            let case = rec.case();
            if n > 0 {
                factorial *= (1.0 - q.powi(n as i32)) / (1.0 - q);
            }
            rec.guard(case, "gamma.factorial", |rec| {
                rec.check(case, "gamma.factorial", rel(gamma_q(n as f64 + 1.0, q, &tol())?, factorial), 1e-12);
                Ok(())
            });
        }
    }
}

fn power(rec: &mut Recorder) {
    let q = 0.5;
    for &mu in &[0.0, 0.5, 1.0, 2.3] {
        for &a in &[0.25, 0.5, 0.9] {
            let case = rec.case();
            rec.guard(case, "power_rule", |rec| {
                let grid = QGrid::new(q, 8, 12)?;
                let base = grid.point(0);
                let f = GridFn::from_fn(&grid, |t| q_factorial_power(t, base, mu, q, &tol()).unwrap_or(f64::NAN))?;
                let k = build_kernel(&grid, 0, order(a)?, &tol())?;
                let got = fractional_integral(&f, &k)?;
                let coef = gamma_q(mu + 1.0, q, &tol())? / gamma_q(a + mu + 1.0, q, &tol())?;
                for i in 1..grid.len() {
                    let want = coef * q_factorial_power(grid.point(i), base, mu + a, q, &tol())?;
                    rec.check(case, "power_rule", rel(got.get(i), want), 1e-8);
                }
                Ok(())
            });
        }
    }
}

fn lemma2(rec: &mut Recorder, rng: &mut ChaCha8Rng, per_pair: usize) {
    for &q in &[0.3, 0.5, 0.9] {
        for &a in &[0.25, 0.5, 0.9, 1.5] {
            let a_index = if a > 1.0 { 1 } else { 0 };
            for _ in 0..per_pair {
                let case = rec.case();
                let values: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
                rec.guard(case, "lemma2", |rec| {
                    let grid = QGrid::new(q, 6, 12)?;
                    let f = GridFn::new(grid, values)?;
                    rec.check(case, "lemma2", caputo_inverse_identity_check(&f, a_index, order(a)?)?, 1e-8);
                    Ok(())
                });
            }
        }
    }
}

fn solver(rec: &mut Recorder) {
    for &q in &[0.3, 0.5] {
        for &a in &[0.5, 0.9] {
            for &lambda in &[0.2, 0.4] {
                let case = rec.case();
                rec.guard(case, "solver.agreement", |rec| {
                    let grid = QGrid::new(q, 11, 12)?;
                    let f = GridFn::from_fn(&grid, |t| (2.0 * t).cos())?;
                    let p = LinearIVP::new(order(a)?, lambda, 0, 1.0, f)?;
                    let closed = solve_linear_closed(&p, &tol())?.solution;
                    let iter = solve_linear_iterative(&p, 2000, 1e-15)?.solution;
                    let march = solve_linear_marching(&p, 1e-15, DEFAULT_MAX_INNER)?.solution;
                    rec.check(case, "solver.closed_vs_iter", closed.sup_distance_from(&iter, 0)?, 1e-7);
                    rec.check(case, "solver.closed_vs_march", closed.sup_distance_from(&march, 0)?, 1e-7);
                    rec.check(case, "solver.iter_vs_march", iter.sup_distance_from(&march, 0)?, 1e-7);
                    Ok(())
                });
            }
        }
    }
}

fn ratio(rec: &mut Recorder) {
    for &q in &[0.3, 0.5] {
        for &a in &[0.5, 0.9] {
            let case = rec.case();
            rec.guard(case, "ratio", |rec| {
                let spec = MLSpec::new(a, 1.0, 1.0, 0.0)?;
                let terms: Vec<f64> = mittag_leffler_terms(&spec, 1.0, q)?.take(41).collect::<qfrac::Result<_>>()?;
                let measured = terms[40] / terms[39];
                rec.check(case, "ratio.term40", (measured - (1.0 - q).powf(a)).abs(), 1e-3);
                Ok(())
            });
        }
    }
}

fn random_coefficient(rng: &mut ChaCha8Rng, grid: &QGrid, alpha: f64, fraction: f64) -> qfrac::Result<GridFn> {
    let q = grid.q();
    GridFn::from_fn(grid, |t| rng.gen::<f64>() * fraction * sart_bound(t, alpha, q))
}

/// `u = u(a) + Omega u - slack`, with each slack a random fraction of the
/// equality solution so that `u` stays nonnegative.
fn slack_below(rng: &mut ChaCha8Rng, op: &OmegaOp, initial: f64) -> qfrac::Result<GridFn> {
    let grid = op.kernel().grid();
    let exact = solve_omega_equation(op, initial, &GridFn::zeros(grid))?;
    let offset = exact.map(|e| -rng.gen::<f64>() * e)?;
    solve_omega_equation(op, initial, &offset)
}

const COMBOS: [(f64, f64); 4] = [(0.3, 0.5), (0.3, 0.9), (0.5, 0.5), (0.5, 0.9)];

fn gronwall(rec: &mut Recorder, rng: &mut ChaCha8Rng, per_combo: usize) {
    for &(q, a) in &COMBOS {
        for _ in 0..per_combo {
            let case = rec.case();
            rec.guard(case, "gronwall", |rec| {
                let grid = QGrid::new(q, 11, 12)?;
                let mu = random_coefficient(rng, &grid, a, 0.9)?;
                let op = OmegaOp::new(build_kernel(&grid, 0, order(a)?, &tol())?, mu.clone())?;
                let va = rng.gen_range(0.5..2.0);
                let v = slack_below(rng, &op, va)?;
                let r = gronwall_bound(&GronwallInput::new(v, mu, order(a)?, 0)?, 1e-17, 10_000)?;
                rec.check(case, "gronwall.violation", r.max_violation, 1e-12);
                Ok(())
            });
        }
    }
}

fn comparison(rec: &mut Recorder, rng: &mut ChaCha8Rng, cases: usize) {
    for n in 0..cases {
        let (q, a) = COMBOS[n % COMBOS.len()];
        let case = rec.case();
        rec.guard(case, "comparison", |rec| {
            let grid = QGrid::new(q, 11, 12)?;
            let alpha = order(a)?;
            let x = random_coefficient(rng, &grid, a, 0.9)?;
            let op = OmegaOp::new(build_kernel(&grid, 0, alpha, &tol())?, x.clone())?;
            let wa = rng.gen_range(0.5..2.0);
            let lift = GridFn::from_fn(&grid, |_| rng.gen::<f64>())?;
            let w = solve_omega_equation(&op, wa, &lift)?;
            let va = wa - 0.5 * rng.gen::<f64>();
            let v = slack_below(rng, &op, va)?;
            let report = verify_comparison(&ComparisonInput { w, v, x, alpha, a_index: 0 }, 1e-12)?;
            rec.require(case, "comparison.hypotheses", report.hypotheses_hold(), || {
                format!(
                    "hypotheses (w, v, sart, initial) = ({}, {}, {}, {})",
                    report.w_inequality, report.v_inequality, report.sart, report.initial_order
                )
            });
            rec.check(case, "comparison.violation", report.max_violation, 1e-12);
            rec.check(case, "comparison.diagonal", report.diagonal_identity_error, 1e-12);
            Ok(())
        });
    }
}

fn classical(rec: &mut Recorder, rng: &mut ChaCha8Rng, cases: usize) {
    let one = FracOrder::new(1.0).expect("order 1 is valid");
    for &q in &[0.3, 0.5] {
        let case = rec.case();
        rec.guard(case, "classical.closed_form", |rec| {
            let grid = QGrid::new(q, 11, 12)?;
            let lambda = 0.75 / (1.0 - q);
            let r = q_gronwall_classical(&GridFn::constant(&grid, 1.0), &GridFn::constant(&grid, lambda), 0, 1e-17)?;
            rec.require(case, "classical.closed_form", r.closed_form.is_some(), || "no closed form".into());
            rec.check(case, "classical.closed_form", r.max_discrepancy, 1e-10);
            Ok(())
        });
    }
    for n in 0..cases {
        let q = if n % 2 == 0 { 0.3 } else { 0.5 };
        let case = rec.case();
        rec.guard(case, "classical.dominates", |rec| {
            let grid = QGrid::new(q, 11, 12)?;
            let delta = GridFn::from_fn(&grid, |_| rng.gen::<f64>() * 0.9 / (1.0 - q))?;
            let op = OmegaOp::new(build_kernel(&grid, 0, one, &tol())?, delta.clone())?;
            let va = rng.gen_range(0.5..2.0);
            let v = slack_below(rng, &op, va)?;
            let r = q_gronwall_classical(&v, &delta, 0, 1e-17)?;
            rec.check(case, "classical.dominates", r.series.max_violation, 1e-12);
            rec.check(case, "classical.product_form", r.max_discrepancy, 1e-10);
            Ok(())
        });
    }
}

fn dependence(rec: &mut Recorder) {
    let setup = |beta: f64| -> qfrac::Result<DependenceSetup> {
        Ok(DependenceSetup {
            grid: QGrid::new(0.5, 11, 12)?,
            alpha: order(0.5)?,
            a_index: 0,
            gamma: 1.0,
            beta,
            lipschitz: 0.5,
            tol: 1e-12,
            sequence_len: 6,
        })
    };
    let case = rec.case();
    rec.guard(case, "dependence.linear", |rec| {
        let r = dependence_experiment(&setup(0.0)?, |_, y| 0.5 * y)?;
        let worst = r.rows.iter().map(|row| rel(row.abs_diff, row.bound)).fold(0.0, f64::max);
        rec.check(case, "dependence.linear_tight", worst, 1e-8);
        rec.check(case, "dependence.series_vs_closed", r.series_vs_closed, 1e-10);
        Ok(())
    });
    let case = rec.case();
    rec.guard(case, "dependence.sine", |rec| {
        let r = dependence_experiment(&setup(0.9)?, |_, y: f64| 0.5 * y.sin())?;
        let excess = r.rows.iter().map(|row| (row.abs_diff - row.bound).max(0.0)).fold(0.0, f64::max);
        rec.check(case, "dependence.sine_bound", excess, 1e-12);
        rec.require(case, "dependence.sequence_monotone", r.monotone, || format!("{:?}", r.sup_diffs));
        rec.require(case, "dependence.sequence_bound", r.sequence_within_bound, || format!("{:?}", r.sup_diffs));
        Ok(())
    });
}

pub fn report(suite: Suite, seed: u64, cases: Option<usize>) -> Report {
    let selected: Vec<Suite> = if suite == Suite::All { Suite::EACH.to_vec() } else { vec![suite] };
    let mut rec = Recorder::default();
    for s in selected {
        let n = cases.unwrap_or_else(|| s.default_cases());
        let mut rng = suite_rng(seed, s);
        match s {
            Suite::Lemma1 => lemma1(&mut rec, &mut rng, n),
            Suite::Gamma => gamma(&mut rec),
            Suite::Power => power(&mut rec),
            Suite::Lemma2 => lemma2(&mut rec, &mut rng, n),
            Suite::Solver => solver(&mut rec),
            Suite::Ratio => ratio(&mut rec),
            Suite::Gronwall => gronwall(&mut rec, &mut rng, n),
            Suite::Comparison => comparison(&mut rec, &mut rng, n),
            Suite::Classical => classical(&mut rec, &mut rng, n),
            Suite::Dependence => dependence(&mut rec),
            Suite::All => unreachable!("expanded above"),
        }
    }
    rec.failures.sort_by_key(|f| f.case);
    Report {
        suite: suite.name().to_string(),
        seed,
        cases: rec.next_case,
        failures: rec.failures,
        max_errors_by_property: rec.max_errors,
    }
}

pub fn run(cfg: &RunConfig, a: &VerifyArgs) -> Result<Outcome, CliError> {
    let cases = cfg.file.pick("cases", a.cases)?;
    let r = report(a.suite, cfg.seed, cases);
    let mut stdout = serde_json::to_string_pretty(&r).map_err(|e| CliError::generic(e.to_string()))?;
    stdout.push('\n');
    let (code, stderr) = if r.failures.is_empty() {
        (0, String::new())
    } else {
        let mut names: Vec<&str> = r.failures.iter().map(|f| f.property.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        (crate::EXIT_GENERIC, format!("error[verify]: failing properties: {}\n", names.join(", ")))
    };
    Ok(Outcome { stdout, stderr, code })
}
