//! Built-in problems, error metrics and convergence studies.

use std::fmt::Write as _;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::expr::{parse, Expr};
use crate::solver::{solve, ProblemSpec, Solution, SolveError, SolveOptions};

/// Observed orders are not reported when either error is below this floor.
pub const ERROR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchError {
    #[error("unknown built-in problem `{0}` (expected ex1 or ex2)")]
    UnknownProblem(String),
    #[error("errors must be positive to form an order, got {0} and {1}")]
    NonPositiveError(f64, f64),
    #[error("problem has no exact solution")]
    NoExactSolution,
    #[error("m-list must be non-empty, start at m >= 1 and double at every step")]
    NotDoubling,
    #[error("grid size must be at least 1")]
    EmptyGrid,
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("study aborted at m = {m} after {} completed rows: {source}", completed.len())]
    Partial { m: usize, completed: Vec<ReportRow>, source: SolveError },
    #[error("malformed report CSV at line {line}: {message}")]
    ReportCsv { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BuiltinId {
    Ex1,
    Ex2,
}

impl BuiltinId {
    pub fn name(self) -> &'static str {
        match self {
            BuiltinId::Ex1 => "ex1",
            BuiltinId::Ex2 => "ex2",
        }
    }
}

impl std::str::FromStr for BuiltinId {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ex1" => Ok(BuiltinId::Ex1),
            "ex2" => Ok(BuiltinId::Ex2),
            other => Err(BenchError::UnknownProblem(other.to_string())),
        }
    }
}

fn expr(src: &str) -> Expr {
    parse(src).expect("built-in expressions are valid")
}

/// The two reference problems.
///
/// * `ex1`: Abel-type equation, α = β = 2/3, k = (√3/(3π)) t^(1/3), f = x^(13/4).
/// * `ex2`: α = 0, β = 1, k = 1/2, g = (6/7) x^(7/2), f = x^(5/2).
pub fn builtin_problem(id: &str) -> Result<ProblemSpec, BenchError> {
    let spec = match id.parse::<BuiltinId>()? {
        BuiltinId::Ex1 => ProblemSpec {
            alpha_sing: 2.0 / 3.0,
            beta: 2.0 / 3.0,
            horizon: 1.0,
            kernel: expr("sqrt(3)/(3*pi)*t^(1/3)"),
            forcing: expr("x^(47/12)*(1 - gamma(1/3)*gamma(55/12)/(pi*sqrt(3)*gamma(59/12)))"),
            exact: Some(expr("x^(13/4)")),
            t_exponent: 1.0 / 3.0,
        },
        BuiltinId::Ex2 => ProblemSpec {
            alpha_sing: 0.0,
            beta: 1.0,
            horizon: 1.0,
            kernel: expr("1/2"),
            forcing: expr("(6/7)*x^3*sqrt(x)"),
            exact: Some(expr("x^(5/2)")),
            t_exponent: 0.0,
        },
    };
    Ok(spec)
}

/// e_m = max_i |f(t_i) - f_m(t_i)| over t_i = i·T/n_grid, i = 0..=n_grid.
pub fn max_error(sol: &Solution, exact: &Expr, n_grid: usize) -> Result<f64, BenchError> {
    if n_grid == 0 {
        return Err(BenchError::EmptyGrid);
    }
    let h = sol.horizon / n_grid as f64;
    let mut worst: f64 = 0.0;
    for i in 0..=n_grid {
        let t = i as f64 * h;
        let f = exact.eval(t, 0.0).map_err(|source| SolveError::Exact { x: t, source })?;
        worst = worst.max((f - sol.eval(t)).abs());
    }
    Ok(worst)
}

/// p = log2(e_m / e_2m).
pub fn observed_order(e_m: f64, e_2m: f64) -> Result<f64, BenchError> {
    if !(e_m > 0.0) || !(e_2m > 0.0) {
        return Err(BenchError::NonPositiveError(e_m, e_2m));
    }
    Ok((e_m / e_2m).log2())
}

/// Observed order column of a report row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Order {
    /// First row of a study.
    Absent,
    /// One of the two errors is below [`ERROR_FLOOR`].
    Suppressed,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub m: usize,
    pub e_m: f64,
    pub p_m: Order,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StudyOptions {
    pub alpha_kl: f64,
    pub eps: f64,
    pub n_quad: usize,
    /// Error grid size; `None` means n_grid = m for each row.
    pub n_grid: Option<usize>,
}

impl Default for StudyOptions {
    fn default() -> Self {
        let s = SolveOptions::default();
        Self { alpha_kl: s.alpha_kl, eps: s.eps, n_quad: s.n_quad, n_grid: None }
    }
}

impl StudyOptions {
    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions { alpha_kl: self.alpha_kl, eps: self.eps, n_quad: self.n_quad }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub problem: String,
    pub options: StudyOptions,
    pub rows: Vec<ReportRow>,
}

pub fn is_doubling(m_list: &[usize]) -> bool {
    !m_list.is_empty() && m_list[0] >= 1 && m_list.windows(2).all(|w| w[1] == 2 * w[0])
}

/// Solves once per m and tabulates e_m, p_m and the solve wall time.
pub fn convergence_study(
    name: &str,
    p: &ProblemSpec,
    m_list: &[usize],
    opts: &StudyOptions,
) -> Result<ConvergenceReport, BenchError> {
    let exact = p.exact.as_ref().ok_or(BenchError::NoExactSolution)?;
    if !is_doubling(m_list) {
        return Err(BenchError::NotDoubling);
    }
    let solve_opts = opts.solve_options();
    let mut rows: Vec<ReportRow> = Vec::with_capacity(m_list.len());
    for &m in m_list {
        let start = Instant::now();
        let sol = match solve(p, m, &solve_opts) {
            Ok(sol) => sol,
            Err(source) => return Err(BenchError::Partial { m, completed: rows, source }),
        };
        let seconds = start.elapsed().as_secs_f64();
        let e_m = match max_error(&sol, exact, opts.n_grid.unwrap_or(m)) {
            Ok(e) => e,
            Err(BenchError::Solve(source)) => return Err(BenchError::Partial { m, completed: rows, source }),
            Err(other) => return Err(other),
        };
        let p_m = match rows.last() {
            None => Order::Absent,
            Some(prev) if prev.e_m < ERROR_FLOOR || e_m < ERROR_FLOOR => Order::Suppressed,
            Some(prev) => Order::Value(observed_order(prev.e_m, e_m)?),
        };
        rows.push(ReportRow { m, e_m, p_m, seconds });
    }
    Ok(ConvergenceReport { problem: name.to_string(), options: *opts, rows })
}

const DASH: &str = "—";

fn fmt_order(p: Order) -> String {
    match p {
        Order::Absent => String::new(),
        Order::Suppressed => DASH.to_string(),
        Order::Value(v) => format!("{v:.2}"),
    }
}

/// Six significant digits, scientific notation.
pub fn fmt_sig6(v: f64) -> String {
    format!("{v:.5e}")
}

impl ConvergenceReport {
    /// `m,e_m,p_m,seconds`; p_m is empty on the first row and `—` below the error floor.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,e_m,p_m,seconds\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{:.6}", r.m, fmt_sig6(r.e_m), fmt_order(r.p_m), r.seconds);
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let o = &self.options;
        let grid = o.n_grid.map_or_else(|| "m".to_string(), |n| n.to_string());
        let _ = writeln!(
            out,
            "Krall-Laguerre collocation, problem {} (alpha_kl = {}, eps = {:e}, quadrature nodes = {}, grid = {})\n",
            self.problem, o.alpha_kl, o.eps, o.n_quad, grid
        );
        out.push_str("| m | e_m | p_m | time (s) |\n");
        out.push_str("|---:|---:|---:|---:|\n");
        for r in &self.rows {
            let p = match r.p_m {
                Order::Absent => "-----".to_string(),
                other => fmt_order(other),
            };
            let _ = writeln!(out, "| {} | {} | {} | {:.6} |", r.m, fmt_sig6(r.e_m), p, r.seconds);
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Parses the rows back from [`ConvergenceReport::to_csv`] output.
pub fn parse_report_csv(csv: &str) -> Result<Vec<ReportRow>, BenchError> {
    let err = |line: usize, message: &str| BenchError::ReportCsv { line, message: message.to_string() };
    let mut lines = csv.lines().enumerate();
    match lines.next() {
        Some((_, "m,e_m,p_m,seconds")) => {}
        _ => return Err(err(1, "missing header")),
    }
    let mut rows = Vec::new();
    for (k, line) in lines {
        let n = k + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(err(n, "expected 4 fields"));
        }
        let m = fields[0].parse().map_err(|_| err(n, "bad m"))?;
        let e_m = fields[1].parse().map_err(|_| err(n, "bad e_m"))?;
        let p_m = match fields[2] {
            "" => Order::Absent,
            DASH => Order::Suppressed,
            v => Order::Value(v.parse().map_err(|_| err(n, "bad p_m"))?),
        };
        let seconds = fields[3].parse().map_err(|_| err(n, "bad seconds"))?;
        rows.push(ReportRow { m, e_m, p_m, seconds });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn builtin_problems() {
        let ex2 = builtin_problem("ex2").unwrap();
        assert_relative_eq!(ex2.eval_forcing(1.0).unwrap(), 6.0 / 7.0, max_relative = 1e-15);
        let ex1 = builtin_problem("ex1").unwrap();
        assert_eq!(ex1.eval_exact(1.0).unwrap().unwrap(), 1.0);
        assert!(ex1.validate().is_ok() && ex2.validate().is_ok());
        assert!(matches!(builtin_problem("ex3"), Err(BenchError::UnknownProblem(_))));
    }

    #[test]
    fn ex1_forcing_constant() {
        // 1 - Γ(1/3)Γ(55/12)/(π√3 Γ(59/12)) from a 30-digit evaluation.
        let ex1 = builtin_problem("ex1").unwrap();
        assert_relative_eq!(ex1.eval_forcing(1.0).unwrap(), 0.696_264_819_253_813_11, max_relative = 1e-12);
    }

    #[test]
    fn ex2_exact_solution_satisfies_the_equation() {
        // x·x^(5/2) - ∫_0^x t^(5/2)/2 dt = x^(7/2)(1 - 1/7).
        let ex2 = builtin_problem("ex2").unwrap();
        for x in [0.1f64, 0.5, 0.9] {
            let f = ex2.eval_exact(x).unwrap().unwrap();
            let integral = x.powf(3.5) / 7.0;
            assert_relative_eq!(x * f - integral, ex2.eval_forcing(x).unwrap(), max_relative = 1e-14);
        }
    }

    #[test]
    fn orders() {
        assert_relative_eq!(observed_order(1e-2, 2.5e-3).unwrap(), 2.0, max_relative = 1e-15);
        assert_eq!(format!("{:.2}", observed_order(1.02e-4, 1.22e-5).unwrap()), "3.06");
        assert_eq!(observed_order(3.7e-5, 3.7e-5).unwrap(), 0.0);
        assert!(observed_order(0.0, 1.0).is_err());
        assert!(observed_order(1.0, -1.0).is_err());
    }

    proptest! {
        #[test]
        fn order_is_antisymmetric(a in 1e-14f64..1.0, b in 1e-14f64..1.0) {
            let fwd = observed_order(a, b).unwrap();
            let back = observed_order(b, a).unwrap();
            prop_assert!((fwd + back).abs() <= 1e-15 * fwd.abs().max(1.0));
        }
    }

    fn fake_solution(power_coeffs: Vec<f64>) -> Solution {
        let p = builtin_problem("ex2").unwrap();
        let mut sol = solve(&p, 1, &SolveOptions::default()).unwrap();
        sol.power_coeffs = power_coeffs;
        sol
    }

    #[test]
    fn max_error_on_grid() {
        let zero = fake_solution(vec![0.0, 0.0]);
        assert_eq!(max_error(&zero, &parse("x").unwrap(), 5).unwrap(), 1.0);
        let ident = fake_solution(vec![0.0, 1.0]);
        assert!(max_error(&ident, &parse("x").unwrap(), 7).unwrap() <= 1e-12);
        assert_eq!(max_error(&ident, &parse("x").unwrap(), 0), Err(BenchError::EmptyGrid));
    }

    #[test]
    fn doubling_lists() {
        assert!(is_doubling(&[3, 6, 12, 24]));
        assert!(is_doubling(&[5]));
        assert!(!is_doubling(&[3, 5]));
        assert!(!is_doubling(&[]));
        assert!(!is_doubling(&[0, 0]));
    }

    #[test]
    fn study_rows() {
        let ex1 = builtin_problem("ex1").unwrap();
        let r = convergence_study("ex1", &ex1, &[3, 6], &StudyOptions::default()).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert_eq!(r.rows[0].p_m, Order::Absent);
        assert!(matches!(r.rows[1].p_m, Order::Value(_)));
    }

    #[test]
    fn both_examples_converge_from_m_3() {
        for id in ["ex1", "ex2"] {
            let p = builtin_problem(id).unwrap();
            let r = convergence_study(id, &p, &[3, 6, 12, 24], &StudyOptions::default()).unwrap();
            assert!(r.rows.windows(2).all(|w| w[1].e_m < w[0].e_m), "{id}: {:?}", r.rows);
            for row in r.rows.iter().filter(|row| row.m >= 12) {
                match row.p_m {
                    Order::Value(p) => assert!(p >= 2.0, "{id} m={} p={p}", row.m),
                    other => panic!("{id} m={}: {other:?}", row.m),
                }
            }
        }
    }

    #[test]
    fn study_suppresses_orders_below_the_floor() {
        let p = ProblemSpec::new(
            0.0,
            1.0,
            1.0,
            parse("1/2").unwrap(),
            parse("(3/4)*x^2").unwrap(),
            Some(parse("x").unwrap()),
            0.0,
        )
        .unwrap();
        let r = convergence_study("manufactured", &p, &[2, 4, 8], &StudyOptions::default()).unwrap();
        assert!(r.rows.iter().all(|row| row.e_m <= 1e-10));
        assert_eq!(r.rows[0].p_m, Order::Absent);
        for row in &r.rows[1..] {
            if row.e_m < ERROR_FLOOR {
                assert_eq!(row.p_m, Order::Suppressed);
            }
        }
    }

    #[test]
    fn study_errors() {
        let mut p = builtin_problem("ex2").unwrap();
        let opts = StudyOptions::default();
        assert_eq!(convergence_study("ex2", &p, &[3, 5], &opts), Err(BenchError::NotDoubling));
        // eps = 0.1 is valid for m = 3 but not for m = 6.
        let wide = StudyOptions { eps: 0.1, ..opts };
        match convergence_study("ex2", &p, &[3, 6], &wide) {
            Err(BenchError::Partial { m, completed, .. }) => {
                assert_eq!(m, 6);
                assert_eq!(completed.len(), 1);
            }
            other => panic!("{other:?}"),
        }
        p.exact = None;
        assert_eq!(convergence_study("ex2", &p, &[3, 6], &opts), Err(BenchError::NoExactSolution));
    }

    #[test]
    fn csv_round_trip() {
        let report = ConvergenceReport {
            problem: "ex2".into(),
            options: StudyOptions::default(),
            rows: vec![
                ReportRow { m: 3, e_m: 1.234567891e-3, p_m: Order::Absent, seconds: 0.0012 },
                ReportRow { m: 6, e_m: 5.6789e-5, p_m: Order::Value(4.4423), seconds: 0.0031 },
                ReportRow { m: 12, e_m: 1e-13, p_m: Order::Suppressed, seconds: 0.01 },
            ],
        };
        let csv = report.to_csv();
        assert!(csv.starts_with("m,e_m,p_m,seconds\n3,1.23457e-3,,"));
        let back = parse_report_csv(&csv).unwrap();
        assert_eq!(back.len(), 3);
        for (a, b) in back.iter().zip(&report.rows) {
            assert_eq!(a.m, b.m);
            assert_eq!(fmt_sig6(a.e_m), fmt_sig6(b.e_m));
            assert_eq!(fmt_order(a.p_m), fmt_order(b.p_m));
            assert_eq!(format!("{:.6}", a.seconds), format!("{:.6}", b.seconds));
        }
        let md = report.to_markdown();
        assert!(md.contains("| 3 | 1.23457e-3 | ----- |"));
        assert!(md.contains("| 6 | 5.67890e-5 | 4.44 |"));
        assert!(md.contains("| 12 | 1.00000e-13 | — |"));
        let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(json["rows"][1]["p_m"]["value"], 4.4423);
        assert!(parse_report_csv("m,e\n").is_err());
        assert!(parse_report_csv("m,e_m,p_m,seconds\n3,x,,0.1\n").is_err());
    }
}
