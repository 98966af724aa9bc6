//! Command-line front end: `solve`, `convergence` and `quad`.
//!
//! Exit codes: 0 success, 1 invalid arguments or problem file, 2 numerical
//! failure, 3 expression parse error. Errors print one line to stderr and
//! nothing to stdout.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::bench::{builtin_problem, convergence_study, fmt_sig6, BenchError, StudyOptions};
use crate::expr::{parse, ParseError};
use crate::quad::{gauss_jacobi, QuadError, DEFAULT_QUAD_NODES};
use crate::solver::{solve, ProblemError, ProblemSpec, Solution, SolveError, SolveOptions, DEFAULT_EPS};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot read problem file {path}: {message}")]
    ProblemFile { path: String, message: String },
    #[error("invalid problem: {0}")]
    Problem(#[from] ProblemError),
    #[error("cannot parse {field} expression: {source}")]
    Parse { field: &'static str, source: ParseError },
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::ProblemFile { .. } | CliError::Problem(_) => 1,
            CliError::Parse { .. } => 3,
            CliError::Bench(BenchError::Solve(e)) | CliError::Bench(BenchError::Partial { source: e, .. }) => {
                solve_code(e)
            }
            CliError::Bench(_) => 1,
            CliError::Solve(e) => solve_code(e),
            CliError::Quad(QuadError::Exponent { .. } | QuadError::NoNodes) => 1,
            CliError::Quad(_) => 2,
            CliError::Io(_) => 2,
        }
    }
}

fn solve_code(e: &SolveError) -> i32 {
    if e.is_numerical() {
        2
    } else {
        1
    }
}

#[derive(Debug, Parser)]
#[command(name = "thirdkind", version, about = "Krall-Laguerre collocation for third-kind Volterra integral equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve once and print the solution on a uniform grid with diagnostics.
    Solve(SolveArgs),
    /// Solve for a doubling list of degrees and tabulate errors and orders.
    Convergence(ConvergenceArgs),
    /// Print a Gauss-Jacobi rule on (0, 1) for the weight (1-s)^a s^b.
    #[command(allow_negative_numbers = true)]
    Quad(QuadArgs),
}

#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
pub struct ProblemArgs {
    /// Built-in problem: ex1 or ex2.
    #[arg(long)]
    pub problem: Option<String>,
    /// JSON problem definition.
    #[arg(long)]
    pub problem_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Md,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct SolverFlags {
    #[arg(long, default_value_t = 2.0)]
    pub alpha_kl: f64,
    #[arg(long, default_value_t = DEFAULT_EPS)]
    pub eps: f64,
    #[arg(long, default_value_t = DEFAULT_QUAD_NODES)]
    pub quad_nodes: usize,
    /// Error/output grid size (default: m).
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long)]
    pub m: usize,
    #[command(flatten)]
    pub flags: SolverFlags,
}

#[derive(Debug, Clone, Args)]
pub struct ConvergenceArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Comma-separated, each entry double the previous, e.g. 3,6,12,24.
    #[arg(long, value_delimiter = ',', required = true)]
    pub m_list: Vec<usize>,
    #[command(flatten)]
    pub flags: SolverFlags,
}

#[derive(Debug, Clone, Args)]
pub struct QuadArgs {
    #[arg(long)]
    pub a: f64,
    #[arg(long)]
    pub b: f64,
    #[arg(long)]
    pub nodes: usize,
}

fn default_horizon() -> f64 {
    1.0
}

/// On-disk problem definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub alpha: f64,
    pub beta: f64,
    #[serde(rename = "T", default = "default_horizon")]
    pub horizon: f64,
    pub kernel: String,
    pub forcing: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<String>,
    #[serde(default)]
    pub t_exponent: f64,
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let fail = |message: String| CliError::ProblemFile { path: path.display().to_string(), message };
        let text = std::fs::read_to_string(path).map_err(|e| fail(e.to_string()))?;
        Self::from_json(&text).map_err(|e| fail(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem file serializes")
    }

    /// Parses the expressions and validates the problem.
    pub fn to_spec(&self) -> Result<ProblemSpec, CliError> {
        let field = |field: &'static str, src: &str| parse(src).map_err(|source| CliError::Parse { field, source });
        let kernel = field("kernel", &self.kernel)?;
        let forcing = field("forcing", &self.forcing)?;
        let exact = self.exact.as_deref().map(|s| field("exact", s)).transpose()?;
        Ok(ProblemSpec::new(self.alpha, self.beta, self.horizon, kernel, forcing, exact, self.t_exponent)?)
    }

    pub fn from_spec(p: &ProblemSpec) -> Self {
        Self {
            alpha: p.alpha_sing,
            beta: p.beta,
            horizon: p.horizon,
            kernel: p.kernel.to_string(),
            forcing: p.forcing.to_string(),
            exact: p.exact.as_ref().map(|e| e.to_string()),
            t_exponent: p.t_exponent,
        }
    }
}

fn load_problem(args: &ProblemArgs) -> Result<(String, ProblemSpec), CliError> {
    match (&args.problem, &args.problem_file) {
        (Some(id), _) => Ok((id.clone(), builtin_problem(id).map_err(|e| CliError::Usage(e.to_string()))?)),
        (None, Some(path)) => Ok((path.display().to_string(), ProblemFile::load(path)?.to_spec()?)),
        (None, None) => Err(CliError::Usage("one of --problem or --problem-file is required".into())),
    }
}

fn solve_options(flags: &SolverFlags) -> Result<SolveOptions, CliError> {
    if flags.grid == Some(0) {
        return Err(CliError::Usage("--grid must be at least 1".into()));
    }
    Ok(SolveOptions { alpha_kl: flags.alpha_kl, eps: flags.eps, n_quad: flags.quad_nodes })
}

struct GridRow {
    x: f64,
    f_m: f64,
    exact: Option<f64>,
}

fn fmt_bound(b: Option<f64>) -> String {
    b.map_or_else(|| "inapplicable".to_string(), fmt_sig6)
}

fn render_solution(name: &str, sol: &Solution, rows: &[GridRow], format: Format) -> String {
    let d = &sol.diagnostics;
    let c = &d.condition;
    let has_exact = rows.first().is_some_and(|r| r.exact.is_some());
    let mut out = String::new();
    match format {
        Format::Csv => {
            out.push_str(if has_exact { "x,f_m,exact,error\n" } else { "x,f_m\n" });
            for r in rows {
                match r.exact {
                    Some(e) => {
                        let _ = writeln!(out, "{},{},{},{}", fmt_sig6(r.x), fmt_sig6(r.f_m), fmt_sig6(e), fmt_sig6((e - r.f_m).abs()));
                    }
                    None => {
                        let _ = writeln!(out, "{},{}", fmt_sig6(r.x), fmt_sig6(r.f_m));
                    }
                }
            }
            out.push_str("\nquantity,value\n");
            let _ = writeln!(out, "cond_estimate,{}", fmt_sig6(c.cond_estimate));
            let _ = writeln!(out, "C0,{}", fmt_sig6(c.c0));
            let _ = writeln!(out, "C1,{}", fmt_sig6(c.c1));
            let _ = writeln!(out, "lemma1_bound,{}", fmt_bound(c.lemma1_bound));
            let _ = writeln!(out, "max_collocation_residual,{}", fmt_sig6(d.max_collocation_residual));
        }
        Format::Md => {
            let _ = writeln!(out, "Problem {name}, m = {}\n", sol.m);
            if has_exact {
                out.push_str("| x | f_m(x) | f(x) | error |\n|---:|---:|---:|---:|\n");
            } else {
                out.push_str("| x | f_m(x) |\n|---:|---:|\n");
            }
            for r in rows {
                match r.exact {
                    Some(e) => {
                        let _ = writeln!(
                            out,
                            "| {} | {} | {} | {} |",
                            fmt_sig6(r.x),
                            fmt_sig6(r.f_m),
                            fmt_sig6(e),
                            fmt_sig6((e - r.f_m).abs())
                        );
                    }
                    None => {
                        let _ = writeln!(out, "| {} | {} |", fmt_sig6(r.x), fmt_sig6(r.f_m));
                    }
                }
            }
            out.push_str("\n| diagnostic | value |\n|---|---:|\n");
            let _ = writeln!(out, "| cond_estimate | {} |", fmt_sig6(c.cond_estimate));
            let _ = writeln!(out, "| C0 | {} |", fmt_sig6(c.c0));
            let _ = writeln!(out, "| C1 | {} |", fmt_sig6(c.c1));
            let _ = writeln!(out, "| Lemma 1 bound | {} |", fmt_bound(c.lemma1_bound));
            let _ = writeln!(out, "| max collocation residual | {} |", fmt_sig6(d.max_collocation_residual));
        }
        Format::Json => {
            let grid: Vec<_> = rows
                .iter()
                .map(|r| match r.exact {
                    Some(e) => json!({ "x": r.x, "f_m": r.f_m, "exact": e, "error": (e - r.f_m).abs() }),
                    None => json!({ "x": r.x, "f_m": r.f_m }),
                })
                .collect();
            let doc = json!({
                "problem": name,
                "m": sol.m,
                "options": { "alpha_kl": sol.options.alpha_kl, "eps": sol.options.eps, "n_quad": sol.options.n_quad },
                "power_coefficients": sol.power_coeffs,
                "grid": grid,
                "diagnostics": {
                    "cond_estimate": c.cond_estimate,
                    "C0": c.c0,
                    "C1": c.c1,
                    "lemma1_bound": c.lemma1_bound.map_or_else(|| json!("inapplicable"), |b| json!(b)),
                    "max_collocation_residual": d.max_collocation_residual,
                },
            });
            out = serde_json::to_string_pretty(&doc).expect("solution serializes");
            out.push('\n');
        }
    }
    out
}

fn cmd_solve(args: &SolveArgs) -> Result<String, CliError> {
    if args.m == 0 {
        return Err(CliError::Usage("--m must be at least 1".into()));
    }
    let opts = solve_options(&args.flags)?;
    let (name, p) = load_problem(&args.problem)?;
    let sol = solve(&p, args.m, &opts)?;
    let n_grid = args.flags.grid.unwrap_or(args.m);
    let h = p.horizon / n_grid as f64;
    let mut rows = Vec::with_capacity(n_grid + 1);
    for i in 0..=n_grid {
        let x = i as f64 * h;
        let exact = p.eval_exact(x).transpose()?;
        rows.push(GridRow { x, f_m: sol.eval(x), exact });
    }
    Ok(render_solution(&name, &sol, &rows, args.flags.format))
}

fn cmd_convergence(args: &ConvergenceArgs) -> Result<String, CliError> {
    let opts = solve_options(&args.flags)?;
    let (name, p) = load_problem(&args.problem)?;
    let study = StudyOptions { alpha_kl: opts.alpha_kl, eps: opts.eps, n_quad: opts.n_quad, n_grid: args.flags.grid };
    let report = convergence_study(&name, &p, &args.m_list, &study)?;
    Ok(match args.flags.format {
        Format::Csv => report.to_csv(),
        Format::Md => report.to_markdown(),
        Format::Json => report.to_json() + "\n",
    })
}

fn cmd_quad(args: &QuadArgs) -> Result<String, CliError> {
    Ok(gauss_jacobi(args.a, args.b, args.nodes)?.to_csv())
}

pub fn execute(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Convergence(a) => cmd_convergence(a),
        Command::Quad(a) => cmd_quad(a),
    }
}

fn one_line(msg: &str) -> String {
    msg.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code. Stdout receives output only on success.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            let _ = write!(stdout, "{e}");
            return 0;
        }
        Err(e) => {
            // Keep the message, drop clap's usage and help hints.
            let rendered = e.to_string();
            let message: Vec<&str> = rendered.lines().take_while(|l| !l.starts_with("Usage:") && !l.starts_with("For more")).collect();
            let _ = writeln!(stderr, "{}", one_line(&message.join(" ")));
            return 1;
        }
    };
    let result = execute(&cli).and_then(|out| stdout.write_all(out.as_bytes()).map_err(CliError::from));
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", one_line(&e.to_string()));
            e.exit_code()
        }
    }
}
