//! `qfrac` command-line front end.
//!
//! Exit codes: 0 success, 1 generic error, 2 hypothesis or precondition
//! violation, 3 input-format error.

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod output;
pub mod verify;

use config::ConfigFile;
use output::Format;

pub const EXIT_GENERIC: i32 = 1;
pub const EXIT_PRECONDITION: i32 = 2;
pub const EXIT_FORMAT: i32 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn generic(message: impl Into<String>) -> Self {
        Self { code: EXIT_GENERIC, kind: "error", message: message.into() }
    }

    pub fn precondition(message: impl Into<String>) -> Self {
        Self { code: EXIT_PRECONDITION, kind: "precondition", message: message.into() }
    }

    pub fn format(message: impl Into<String>) -> Self {
        Self { code: EXIT_FORMAT, kind: "input", message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {}", self.kind, self.message)
    }
}

impl From<qfrac::Error> for CliError {
    fn from(e: qfrac::Error) -> Self {
        let kind = match &e {
            qfrac::Error::Domain(_) => "domain",
            qfrac::Error::Range(_) => "range",
            qfrac::Error::Boundary(_) => "boundary",
            qfrac::Error::Argument(_) => "argument",
            qfrac::Error::Divergence { .. } => "divergence",
            qfrac::Error::NotConverged { .. } => "not-converged",
            qfrac::Error::Step { .. } => "step",
            qfrac::Error::Precondition { .. } => "precondition",
            qfrac::Error::Pole { .. } => "pole",
            qfrac::Error::Internal(_) => "internal",
        };
        let code = if matches!(e, qfrac::Error::Precondition { .. }) { EXIT_PRECONDITION } else { EXIT_GENERIC };
        Self { code, kind, message: e.to_string() }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qfrac", version, about = "q-fractional calculus toolkit on the time scale T_q")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Base q in (0, 1)
    #[arg(long, global = true)]
    pub q: Option<f64>,
    /// Fractional order
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Second Mittag-Leffler parameter; initial value psi(a) for `demo dependence`
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    /// Grid starts at q^n_start
    #[arg(long = "n-start", global = true, allow_hyphen_values = true)]
    pub n_start: Option<i32>,
    /// Grid steps; the grid has steps + 1 points
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub y0: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Flat key=value file with defaults for the flags above
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a primitive
    Eval(commands::EvalArgs),
    /// Solve a Caputo initial value problem on a grid
    Solve(commands::SolveArgs),
    /// Gronwall bound for (t, v, mu) rows from a CSV file
    Bound(commands::BoundArgs),
    /// Run a verification suite and print a JSON report
    Verify(verify::VerifyArgs),
    /// Demonstrations
    Demo {
        #[command(subcommand)]
        which: commands::Demo,
    },
}

/// Resolved common settings.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub file: ConfigFile,
    pub flags: CommonArgs,
    pub q: f64,
    pub alpha: f64,
    pub n_start: i32,
    pub steps: usize,
    pub y0: f64,
    pub seed: u64,
    pub format: Format,
}

impl RunConfig {
    pub fn resolve(flags: &CommonArgs) -> Result<Self, CliError> {
        let file = match &flags.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        Ok(Self {
            q: file.pick_or("q", flags.q, 0.5)?,
            alpha: file.pick_or("alpha", flags.alpha, 0.5)?,
            n_start: file.pick_or("n-start", flags.n_start, 11)?,
            steps: file.pick_or("steps", flags.steps, 11)?,
            y0: file.pick_or("y0", flags.y0, 1.0)?,
            seed: file.pick_or("seed", flags.seed, 7)?,
            format: file.pick_or("format", flags.format, Format::Csv)?,
            flags: flags.clone(),
            file,
        })
    }

    pub fn grid(&self) -> Result<qfrac::QGrid, CliError> {
        Ok(qfrac::QGrid::new(self.q, self.n_start, self.steps + 1)?)
    }

    pub fn beta(&self, default: f64) -> Result<f64, CliError> {
        self.file.pick_or("beta", self.flags.beta, default)
    }

    pub fn lambda(&self, default: f64) -> Result<f64, CliError> {
        self.file.pick_or("lambda", self.flags.lambda, default)
    }

    pub fn tol(&self, default: f64) -> Result<f64, CliError> {
        self.file.pick_or("tol", self.flags.tol, default)
    }
}

/// Process outcome: text for stdout and stderr plus the exit code.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_FORMAT } else { 0 };
            let text = e.render().to_string();
            return if code == 0 {
                Outcome { stdout: text, ..Outcome::default() }
            } else {
                Outcome { stderr: text, code, ..Outcome::default() }
            };
        }
    };
    match dispatch(&cli) {
        Ok(out) => out,
        Err(e) => Outcome { stdout: String::new(), stderr: format!("{e}\n"), code: e.code },
    }
}

fn dispatch(cli: &Cli) -> Result<Outcome, CliError> {
    let cfg = RunConfig::resolve(&cli.common)?;
    match &cli.command {
        Command::Eval(a) => commands::eval(&cfg, a),
        Command::Solve(a) => commands::solve(&cfg, a),
        Command::Bound(a) => commands::bound(&cfg, a),
        Command::Verify(a) => verify::run(&cfg, a),
        Command::Demo { which } => commands::demo(&cfg, which),
    }
}
