use std::path::PathBuf;

use clap::{Args, Subcommand, ValueEnum};

use qfrac::gronwall::{check_sart, dependence_experiment, gronwall_bound, DependenceSetup, GronwallInput};
use qfrac::operators::build_kernel;
use qfrac::qcore::{gamma_q, q_factorial_power, q_ratio_product};
use qfrac::solver::{
    solve_linear_closed, solve_linear_iterative, solve_linear_marching, solve_marching, LinearIVP, NonlinearIVP,
    DEFAULT_MAX_INNER,
};
use qfrac::special::{mittag_leffler, mittag_leffler_modified, q_exp_big, q_exp_big_series, q_exp_small, MLSpec};
use qfrac::{FracOrder, GridFn, QGrid, Tolerance};

use crate::output::{Cell, Table};
use crate::{CliError, Outcome, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalKind {
    /// q-Gamma at --alpha
    Gamma,
    /// (t - s)_q^nu
    Qfac,
    /// q-Mittag-Leffler E_{alpha,beta}(lambda, t - t0)
    Ml,
    /// small q-exponential e_q(t)
    Eq,
    /// big q-exponential E_q(t), product and series
    #[value(name = "Eq")]
    BigEq,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(value_enum)]
    pub kind: EvalKind,
    #[arg(long, allow_hyphen_values = true)]
    pub t: Option<f64>,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub t0: Option<f64>,
    /// Use the modified Mittag-Leffler series
    #[arg(long)]
    pub modified: bool,
}

fn print(cfg: &RunConfig, table: &Table) -> Result<Outcome, CliError> {
    Ok(Outcome { stdout: table.render(cfg.format)?, ..Outcome::default() })
}

fn product_terms(r: f64, nu: f64, q: f64, tol: &Tolerance) -> Result<usize, CliError> {
    if nu >= 0.0 && nu.fract() == 0.0 {
        return Ok(nu as usize);
    }
    Ok(q_ratio_product(r, nu, q, tol)?.1)
}

pub fn eval(cfg: &RunConfig, a: &EvalArgs) -> Result<Outcome, CliError> {
    let q = cfg.q;
    let tol = Tolerance::default();
    let t = cfg.file.pick_or("t", a.t, 1.0)?;
    let mut table = Table::new(&["kind", "input", "value", "terms_used"]);
    match a.kind {
        EvalKind::Gamma => {
            let alpha = cfg.alpha;
            let v = gamma_q(alpha, q, &tol)?;
            let terms = product_terms(q, alpha - 1.0, q, &tol)?;
            table.push(vec![
                Cell::Text("gamma".into()),
                Cell::Text(format!("alpha={alpha}")),
                Cell::Num(v),
                Cell::Int(terms),
            ]);
        }
        EvalKind::Qfac => {
            let s = cfg.file.pick_or("s", a.s, 0.0)?;
            let nu = cfg.file.pick_or("nu", a.nu, cfg.alpha)?;
            let v = q_factorial_power(t, s, nu, q, &tol)?;
            let terms = product_terms(s / t, nu, q, &tol)?;
            table.push(vec![
                Cell::Text("qfac".into()),
                Cell::Text(format!("t={t};s={s};nu={nu}")),
                Cell::Num(v),
                Cell::Int(terms),
            ]);
        }
        EvalKind::Ml => {
            let beta = cfg.beta(1.0)?;
            let lambda = cfg.lambda(0.4)?;
            let t0 = cfg.file.pick_or("t0", a.t0, 0.0)?;
            let spec = MLSpec::new(cfg.alpha, beta, lambda, t0)?;
            let r = if a.modified { mittag_leffler_modified(&spec, t, q)? } else { mittag_leffler(&spec, t, q)? };
            let name = if a.modified { "ml-modified" } else { "ml" };
            table.push(vec![
                Cell::Text(name.into()),
                Cell::Text(format!("alpha={};beta={beta};lambda={lambda};t={t};t0={t0}", cfg.alpha)),
                Cell::Num(r.value),
                Cell::Int(r.terms_used),
            ]);
        }
        EvalKind::Eq => {
            let v = q_exp_small(t, q, &tol)?;
            table.push(vec![Cell::Text("eq".into()), Cell::Text(format!("t={t}")), Cell::Num(v), Cell::Empty]);
        }
        EvalKind::BigEq => {
            let v = q_exp_big(t, q, &tol)?;
            table.push(vec![Cell::Text("Eq-product".into()), Cell::Text(format!("t={t}")), Cell::Num(v), Cell::Empty]);
            if t.abs() < 1.0 {
                let s = q_exp_big_series(t, q, &tol)?;
                table.push(vec![
                    Cell::Text("Eq-series".into()),
                    Cell::Text(format!("t={t}")),
                    Cell::Num(s),
                    Cell::Empty,
                ]);
            }
        }
    }
    print(cfg, &table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Problem {
    /// C^alpha y = lambda y + f(t)
    Linear,
    /// C^alpha y = L sin(y) + f(t)
    Sine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Forcing {
    Zero,
    One,
    T,
    Sin,
}

impl Forcing {
    fn eval(self, t: f64) -> f64 {
        match self {
            Forcing::Zero => 0.0,
            Forcing::One => 1.0,
            Forcing::T => t,
            Forcing::Sin => t.sin(),
        }
    }
}

impl std::str::FromStr for Problem {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        <Self as ValueEnum>::from_str(s, false)
    }
}

impl std::str::FromStr for Forcing {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        <Self as ValueEnum>::from_str(s, false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolveMethod {
    Closed,
    Iter,
    March,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long, value_enum)]
    pub problem: Option<Problem>,
    #[arg(long, value_enum)]
    pub forcing: Option<Forcing>,
    /// Coefficient L of the sine problem
    #[arg(long, allow_hyphen_values = true)]
    pub lipschitz: Option<f64>,
    /// Comma-separated subset of closed,iter,march
    #[arg(long, value_enum, value_delimiter = ',')]
    pub methods: Vec<SolveMethod>,
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
}

pub fn solve(cfg: &RunConfig, a: &SolveArgs) -> Result<Outcome, CliError> {
    let grid = cfg.grid()?;
    let alpha = FracOrder::unit(cfg.alpha)?;
    let tol = cfg.tol(1e-14)?;
    let problem = cfg.file.pick_or("problem", a.problem, Problem::Linear)?;
    let forcing_kind = cfg.file.pick_or("forcing", a.forcing, Forcing::Zero)?;
    let forcing = GridFn::from_fn(&grid, |t| forcing_kind.eval(t))?;
    let kernel = build_kernel(&grid, 0, alpha, &Tolerance::default())?;
    let y0 = cfg.y0;

    let mut columns: Vec<(&str, GridFn)> = Vec::new();
    let mut header = vec!["t"];
    match problem {
        Problem::Linear => {
            let methods = if a.methods.is_empty() {
                vec![SolveMethod::Closed, SolveMethod::Iter, SolveMethod::March]
            } else {
                a.methods.clone()
            };
            let lambda = cfg.lambda(0.4)?;
            let max_iter = cfg.file.pick_or("max-iter", a.max_iter, 1000)?;
            let p = LinearIVP::new(alpha, lambda, 0, y0, forcing.clone())?;
            for (m, name) in [(SolveMethod::Closed, "y_closed"), (SolveMethod::Iter, "y_iter"), (SolveMethod::March, "y_march")] {
                if !methods.contains(&m) {
                    continue;
                }
                let report = match m {
                    SolveMethod::Closed => solve_linear_closed(&p, &Tolerance::default())?,
                    SolveMethod::Iter => solve_linear_iterative(&p, max_iter, tol)?,
                    SolveMethod::March => solve_linear_marching(&p, tol, DEFAULT_MAX_INNER)?,
                };
                header.push(name);
                columns.push((name, report.solution));
            }
            let integral_f = kernel.apply(&forcing)?;
            let mut defect = vec![0.0f64; grid.len()];
            for (_, y) in &columns {
                let iy = kernel.apply(y)?;
                for (i, d) in defect.iter_mut().enumerate() {
                    *d = d.max((y.get(i) - y0 - lambda * iy.get(i) - integral_f.get(i)).abs());
                }
            }
            columns.push(("defect", GridFn::new(grid.clone(), defect)?));
        }
        Problem::Sine => {
            if a.methods.iter().any(|&m| m != SolveMethod::March) {
                return Err(CliError::format("the sine problem is only solved by marching (--methods march)"));
            }
            let l = cfg.file.pick_or("lipschitz", a.lipschitz, 0.5)?;
            let rhs = |t: f64, y: f64| l * y.sin() + forcing_kind.eval(t);
            let p = NonlinearIVP::new(grid.clone(), alpha, 0, y0, rhs, l.abs())?;
            let report = solve_marching(&p, tol, DEFAULT_MAX_INNER)?;
            let y = report.solution;
            let fy = GridFn::new(grid.clone(), grid.points().iter().zip(y.values()).map(|(&t, &v)| rhs(t, v)).collect())?;
            let ify = kernel.apply(&fy)?;
            let defect = (0..grid.len()).map(|i| (y.get(i) - y0 - ify.get(i)).abs()).collect();
            header.push("y_march");
            columns.push(("y_march", y));
            columns.push(("defect", GridFn::new(grid.clone(), defect)?));
        }
    }
    header.push("defect");

    let mut table = Table::new(&header);
    for (i, &t) in grid.points().iter().enumerate() {
        let mut row = vec![Cell::Num(t)];
        row.extend(columns.iter().map(|(_, c)| Cell::Num(c.get(i))));
        table.push(row);
    }
    print(cfg, &table)
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    /// CSV file with a header row; `#` lines are comments
    pub input: PathBuf,
    /// Constant mu used when the file has no mu column
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long = "v-column", default_value = "v")]
    pub v_column: String,
    #[arg(long = "mu-column", default_value = "mu")]
    pub mu_column: String,
}

struct BoundRows {
    t: Vec<f64>,
    v: Vec<f64>,
    mu: Option<Vec<f64>>,
}

fn read_bound_rows(a: &BoundArgs) -> Result<BoundRows, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(&a.input)
        .map_err(|e| CliError::format(format!("cannot read {}: {e}", a.input.display())))?;
    let headers = reader.headers().map_err(|e| CliError::format(format!("bad header: {e}")))?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let ti = find("t").ok_or_else(|| CliError::format("input has no `t` column"))?;
    let vi = find(&a.v_column).ok_or_else(|| CliError::format(format!("input has no `{}` column", a.v_column)))?;
    let mi = find(&a.mu_column);

    let mut rows = BoundRows { t: Vec::new(), v: Vec::new(), mu: mi.map(|_| Vec::new()) };
    for (n, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::format(format!("row {}: {e}", n + 1)))?;
        let num = |i: usize, what: &str| -> Result<f64, CliError> {
            let raw = rec.get(i).unwrap_or("");
            raw.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| CliError::format(format!("row {}: `{raw}` is not a number in column {what}", n + 1)))
        };
        rows.t.push(num(ti, "t")?);
        rows.v.push(num(vi, &a.v_column)?);
        if let (Some(i), Some(m)) = (mi, rows.mu.as_mut()) {
            m.push(num(i, &a.mu_column)?);
        }
    }
    if rows.t.is_empty() {
        return Err(CliError::format("input has no data rows"));
    }
    Ok(rows)
}

/// The grid `q^n, q^(n-1), ...` matching `t` to 1e-9 relative.
fn grid_from_points(t: &[f64], q: f64) -> Result<QGrid, CliError> {
    if !(t[0] > 0.0) {
        return Err(CliError::format(format!("t = {} is not a grid point", t[0])));
    }
    let n = (t[0].ln() / q.ln()).round();
    if !(n.abs() < i32::MAX as f64) {
        return Err(CliError::format(format!("t = {} is not a grid point", t[0])));
    }
    let grid = QGrid::new(q, n as i32, t.len()).map_err(|e| CliError::format(e.to_string()))?;
    for (i, (&got, &want)) in t.iter().zip(grid.points()).enumerate() {
        if !((got - want).abs() <= 1e-9 * want) {
            return Err(CliError::format(format!("row {}: t = {got} does not match grid point {want} (q = {q})", i + 1)));
        }
    }
    Ok(grid)
}

pub fn bound(cfg: &RunConfig, a: &BoundArgs) -> Result<Outcome, CliError> {
    let rows = read_bound_rows(a)?;
    let grid = grid_from_points(&rows.t, cfg.q)?;
    let mu_values = match rows.mu {
        Some(m) => m,
        None => {
            let c = cfg.file.pick("mu", a.mu)?.ok_or_else(|| {
                CliError::format(format!("input has no `{}` column; pass --mu for a constant", a.mu_column))
            })?;
            vec![c; grid.len()]
        }
    };
    let alpha = FracOrder::unit(cfg.alpha)?;
    let v = GridFn::new(grid.clone(), rows.v).map_err(|e| CliError::format(e.to_string()))?;
    let mu = GridFn::new(grid.clone(), mu_values).map_err(|e| CliError::format(e.to_string()))?;

    let bad: Vec<String> = check_sart(&mu, alpha, true)
        .iter()
        .zip(grid.points())
        .filter(|(ok, _)| !**ok)
        .map(|(_, t)| t.to_string())
        .collect();
    if !bad.is_empty() {
        return Err(CliError::precondition(format!(
            "mu violates 0 <= mu(t) < 1/(t^alpha (1-q)^alpha) at t = {}",
            bad.join(", ")
        )));
    }

    let input = GronwallInput::new(v.clone(), mu, alpha, 0)?;
    let r = gronwall_bound(&input, cfg.tol(1e-17)?, Tolerance::default().max_terms)?;
    let mut table = Table::new(&["t", "v", "bound", "satisfied"]);
    for (i, &t) in grid.points().iter().enumerate() {
        table.push(vec![Cell::Num(t), Cell::Num(v.get(i)), Cell::Num(r.bound.get(i)), Cell::Flag(r.satisfied[i])]);
    }
    table.summary.push(("max_violation".into(), Cell::Num(r.max_violation)));
    table.summary.push(("terms_used".into(), Cell::Int(r.terms_used)));
    print(cfg, &table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DependenceRhs {
    /// f(t, y) = L y
    Linear,
    /// f(t, y) = L sin(y)
    Sine,
}

impl std::str::FromStr for DependenceRhs {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        <Self as ValueEnum>::from_str(s, false)
    }
}

#[derive(Debug, Subcommand)]
pub enum Demo {
    /// Continuous dependence on the initial value: phi(a) = gamma, psi(a) = beta
    Dependence(DependenceArgs),
}

#[derive(Debug, Args)]
pub struct DependenceArgs {
    #[arg(long)]
    pub lipschitz: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    #[arg(long, value_enum)]
    pub rhs: Option<DependenceRhs>,
}

pub fn demo(cfg: &RunConfig, which: &Demo) -> Result<Outcome, CliError> {
    let Demo::Dependence(a) = which;
    let l = cfg.file.pick_or("lipschitz", a.lipschitz, 0.5)?;
    let setup = DependenceSetup {
        grid: cfg.grid()?,
        alpha: FracOrder::unit(cfg.alpha)?,
        a_index: 0,
        gamma: cfg.file.pick_or("gamma", a.gamma, 1.0)?,
        beta: cfg.beta(0.9)?,
        lipschitz: l,
        tol: cfg.tol(1e-12)?,
        sequence_len: 6,
    };
    let report = match cfg.file.pick_or("rhs", a.rhs, DependenceRhs::Sine)? {
        DependenceRhs::Linear => dependence_experiment(&setup, |_, y| l * y)?,
        DependenceRhs::Sine => dependence_experiment(&setup, |_, y: f64| l * y.sin())?,
    };
    let mut table = Table::new(&["t", "phi", "psi", "abs_diff", "bound", "satisfied"]);
    for r in &report.rows {
        table.push(vec![
            Cell::Num(r.t),
            Cell::Num(r.phi),
            Cell::Num(r.psi),
            Cell::Num(r.abs_diff),
            Cell::Num(r.bound),
            Cell::Flag(r.satisfied),
        ]);
    }
    table.summary.push(("series_vs_closed".into(), Cell::Num(report.series_vs_closed)));
    table.summary.push(("monotone".into(), Cell::Flag(report.monotone)));
    table.summary.push(("sequence_within_bound".into(), Cell::Flag(report.sequence_within_bound)));
    print(cfg, &table)
}
