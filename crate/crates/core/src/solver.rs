//! Collocation solver for
//!
//! ```text
//! x^β f(x) = g(x) + ∫_0^x (x - t)^(-α) k(x, t) f(t) dt,   x ∈ [0, T]
//! ```
//!
//! The unknown is sought as `f_m(x) = Σ c_i p_{m,i}(x)` in the Krall-Laguerre
//! basis. Requiring the equation at the m+1 nodes `x_j` gives `B c = Y` with
//!
//! ```text
//! B[j][i] = λ_i (x_j^(β+i) - ∫_0^{x_j} (x_j - t)^(-α) k(x_j, t) t^i dt),   Y[j] = g(x_j).
//! ```

use std::collections::BTreeSet;

use thiserror::Error;

use crate::basis::{eval_power_poly, BasisError, KrallLaguerreBasis, DEFAULT_ALPHA_KL};
use crate::expr::{EvalError, Expr, Var};
use crate::linalg::{LinalgError, LuFactors, Matrix};
use crate::quad::{self, QuadConfig, QuadError, DEFAULT_QUAD_NODES};

pub use crate::linalg::lu_solve;

pub const DEFAULT_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("singularity exponent alpha = {0} must lie in [0, 1)")]
    Alpha(f64),
    #[error("beta = {0} must be positive")]
    Beta(f64),
    #[error("horizon T = {0} must be positive and finite")]
    Horizon(f64),
    #[error("t exponent hint = {0} must be finite and non-negative")]
    TExponent(f64),
    #[error("{what} may only use the variables {{{allowed}}}")]
    FreeVariables { what: &'static str, allowed: &'static str },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error("degree m must be at least 1")]
    DegreeTooSmall,
    #[error("quadrature node count must be at least 1")]
    NoQuadNodes,
    #[error("node offset eps = {eps} must lie in (0, 1/(2m)) for m = {m}")]
    Eps { eps: f64, m: usize },
    #[error("assembly failed at row {row}, column {col}: {source}")]
    Assembly { row: usize, col: usize, source: QuadError },
    #[error("quadrature failed at x = {x}: {source}")]
    Quadrature { x: f64, source: QuadError },
    #[error("forcing evaluation failed at x = {x}: {source}")]
    Forcing { x: f64, source: EvalError },
    #[error("exact solution evaluation failed at x = {x}: {source}")]
    Exact { x: f64, source: EvalError },
    #[error("basis has degree {basis} but nodes have degree {nodes}")]
    DegreeMismatch { basis: usize, nodes: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

impl SolveError {
    /// Whether the failure is numerical (as opposed to invalid input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            SolveError::Assembly { .. }
                | SolveError::Quadrature { .. }
                | SolveError::Forcing { .. }
                | SolveError::Exact { .. }
                | SolveError::Linalg(_)
        )
    }
}

/// A linear third-kind Volterra equation on [0, T].
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub alpha_sing: f64,
    pub beta: f64,
    pub horizon: f64,
    pub kernel: Expr,
    pub forcing: Expr,
    pub exact: Option<Expr>,
    pub t_exponent: f64,
}

impl ProblemSpec {
    pub fn new(
        alpha_sing: f64,
        beta: f64,
        horizon: f64,
        kernel: Expr,
        forcing: Expr,
        exact: Option<Expr>,
        t_exponent: f64,
    ) -> Result<Self, ProblemError> {
        let p = Self { alpha_sing, beta, horizon, kernel, forcing, exact, t_exponent };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ProblemError> {
        if !(0.0..1.0).contains(&self.alpha_sing) {
            return Err(ProblemError::Alpha(self.alpha_sing));
        }
        // β > 0 together with α ≥ 0 also gives α + β > 0.
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(ProblemError::Beta(self.beta));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(ProblemError::Horizon(self.horizon));
        }
        if !(self.t_exponent >= 0.0) || !self.t_exponent.is_finite() {
            return Err(ProblemError::TExponent(self.t_exponent));
        }
        let only_x = BTreeSet::from([Var::X]);
        if !self.forcing.free_vars().is_subset(&only_x) {
            return Err(ProblemError::FreeVariables { what: "forcing", allowed: "x" });
        }
        if let Some(exact) = &self.exact {
            if !exact.free_vars().is_subset(&only_x) {
                return Err(ProblemError::FreeVariables { what: "exact solution", allowed: "x" });
            }
        }
        // The kernel can only mention x and t; the parser guarantees that.
        Ok(())
    }

    pub fn quad_config(&self, n_quad: usize) -> QuadConfig {
        QuadConfig::new(n_quad, self.t_exponent)
    }

    pub fn eval_forcing(&self, x: f64) -> Result<f64, SolveError> {
        self.forcing.eval(x, 0.0).map_err(|source| SolveError::Forcing { x, source })
    }

    pub fn eval_exact(&self, x: f64) -> Option<Result<f64, SolveError>> {
        self.exact.as_ref().map(|e| e.eval(x, 0.0).map_err(|source| SolveError::Exact { x, source }))
    }
}

/// x_j = (j/m + eps)·T for j < m, x_m = (1 - eps)·T.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocationNodes {
    pub m: usize,
    pub eps: f64,
    pub x: Vec<f64>,
}

pub fn make_nodes(m: usize, eps: f64, horizon: f64) -> Result<CollocationNodes, SolveError> {
    if m == 0 {
        return Err(SolveError::DegreeTooSmall);
    }
    if !(eps > 0.0 && eps < 0.5 / m as f64) {
        return Err(SolveError::Eps { eps, m });
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(ProblemError::Horizon(horizon).into());
    }
    let mut x: Vec<f64> = (0..m).map(|j| (j as f64 / m as f64 + eps) * horizon).collect();
    x.push((1.0 - eps) * horizon);
    Ok(CollocationNodes { m, eps, x })
}

/// The collocation system `B c = Y`.
///
/// `reduced` is `B` without the basis scaling, `B = reduced · diag(λ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocationSystem {
    pub matrix: Matrix,
    pub reduced: Matrix,
    pub lambda: Vec<f64>,
    pub rhs: Vec<f64>,
    pub nodes: CollocationNodes,
}

impl CollocationSystem {
    pub fn dim(&self) -> usize {
        self.rhs.len()
    }
}

/// x^p for x > 0, evaluated as exp(p ln x).
fn pos_pow(x: f64, p: f64) -> f64 {
    (p * x.ln()).exp()
}

pub fn assemble(
    p: &ProblemSpec,
    basis: &KrallLaguerreBasis,
    nodes: &CollocationNodes,
    qcfg: &QuadConfig,
) -> Result<CollocationSystem, SolveError> {
    if basis.degree() != nodes.m {
        return Err(SolveError::DegreeMismatch { basis: basis.degree(), nodes: nodes.m });
    }
    let n = nodes.m + 1;
    let lambda = basis.lambda().to_vec();
    let mut reduced = Matrix::zeros(n, n);
    let mut rhs = Vec::with_capacity(n);
    for (j, &xj) in nodes.x.iter().enumerate() {
        let row = reduced.row_mut(j);
        for (i, entry) in row.iter_mut().enumerate() {
            let moment = quad::singular_moment(&p.kernel, p.alpha_sing, i, xj, qcfg)
                .map_err(|source| SolveError::Assembly { row: j, col: i, source })?;
            *entry = pos_pow(xj, p.beta + i as f64) - moment;
        }
        rhs.push(p.eval_forcing(xj)?);
    }
    let mut matrix = reduced.clone();
    for j in 0..n {
        for (entry, l) in matrix.row_mut(j).iter_mut().zip(&lambda) {
            *entry *= l;
        }
    }
    Ok(CollocationSystem { matrix, reduced, lambda, rhs, nodes: nodes.clone() })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub alpha_kl: f64,
    pub eps: f64,
    pub n_quad: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { alpha_kl: DEFAULT_ALPHA_KL, eps: DEFAULT_EPS, n_quad: DEFAULT_QUAD_NODES }
    }
}

/// Norm and condition quantities of the assembled matrix B.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionDiagnostics {
    /// ‖B‖_∞.
    pub b_norm: f64,
    /// C0 = ‖B - I‖_∞.
    pub c0: f64,
    /// C1 = max_j ∫_0^{x_j} |(x_j - t)^(-α) k(x_j, t)| dt.
    pub c1: f64,
    /// (1 + C1)/(1 - C0), present only when C0 < 1.
    pub lemma1_bound: Option<f64>,
    /// ‖B‖_∞ ‖B⁻¹‖_∞; +∞ when B is singular.
    pub cond_estimate: f64,
    pub singular: bool,
}

impl ConditionDiagnostics {
    pub fn lemma_applicable(&self) -> bool {
        self.lemma1_bound.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub condition: ConditionDiagnostics,
    pub max_collocation_residual: f64,
}

/// Condition diagnostics of `B`. A singular matrix is reported through
/// `singular` and an infinite `cond_estimate`, never as an error.
pub fn condition_diagnostics(
    sys: &CollocationSystem,
    p: &ProblemSpec,
    qcfg: &QuadConfig,
) -> Result<ConditionDiagnostics, SolveError> {
    let b_norm = sys.matrix.norm_inf();
    let c0 = sys.matrix.distance_from_identity_inf();
    let mut c1: f64 = 0.0;
    for &x in &sys.nodes.x {
        let v = quad::l1_kernel_norm(&p.kernel, p.alpha_sing, x, qcfg)
            .map_err(|source| SolveError::Quadrature { x, source })?;
        c1 = c1.max(v);
    }
    let lemma1_bound = (c0 < 1.0).then(|| (1.0 + c1) / (1.0 - c0));
    let (cond_estimate, singular) = match LuFactors::new(&sys.matrix) {
        Ok(lu) => (b_norm * lu.inverse_norm_inf(), false),
        Err(LinalgError::Singular { .. }) => (f64::INFINITY, true),
        Err(e) => return Err(e.into()),
    };
    Ok(ConditionDiagnostics { b_norm, c0, c1, lemma1_bound, cond_estimate, singular })
}

/// A solved collocation problem. `f_m(x) = Σ power_coeffs[i] x^i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub m: usize,
    pub horizon: f64,
    pub options: SolveOptions,
    pub nodes: CollocationNodes,
    /// Coefficients in the p_{m,i} basis.
    pub coefficients: Vec<f64>,
    pub power_coeffs: Vec<f64>,
    pub diagnostics: Diagnostics,
}

impl Solution {
    /// f_m(x).
    pub fn eval(&self, x: f64) -> f64 {
        eval_power_poly(&self.power_coeffs, x)
    }
}

/// x^β f_m(x) - g(x) - ∫_0^x (x - t)^(-α) k(x, t) f_m(t) dt, with the integral
/// taken term by term over the power coefficients of f_m.
pub fn collocation_residual(p: &ProblemSpec, sol: &Solution, x: f64, qcfg: &QuadConfig) -> Result<f64, SolveError> {
    residual_of(p, &sol.power_coeffs, x, qcfg)
}

fn residual_of(p: &ProblemSpec, power_coeffs: &[f64], x: f64, qcfg: &QuadConfig) -> Result<f64, SolveError> {
    let mut integral = 0.0;
    for (i, &a) in power_coeffs.iter().enumerate() {
        // The integral over [0, 0] vanishes.
        if a != 0.0 && x != 0.0 {
            let moment = quad::singular_moment(&p.kernel, p.alpha_sing, i, x, qcfg)
                .map_err(|source| SolveError::Quadrature { x, source })?;
            integral += a * moment;
        }
    }
    Ok(pos_pow(x, p.beta) * eval_power_poly(power_coeffs, x) - p.eval_forcing(x)? - integral)
}

/// Assembles and solves the degree-`m` collocation system.
///
/// The LU factorization runs on the unscaled matrix `B·diag(λ)⁻¹`; the basis
/// coefficients are recovered as `c_i = ĉ_i / λ_i`. This is the same solution
/// in exact arithmetic and keeps the reconstructed polynomial independent of
/// the basis parameter in floating point.
pub fn solve(p: &ProblemSpec, m: usize, opts: &SolveOptions) -> Result<Solution, SolveError> {
    p.validate()?;
    if m == 0 {
        return Err(SolveError::DegreeTooSmall);
    }
    if opts.n_quad == 0 {
        return Err(SolveError::NoQuadNodes);
    }
    let basis = KrallLaguerreBasis::new(m, opts.alpha_kl)?;
    let nodes = make_nodes(m, opts.eps, p.horizon)?;
    let qcfg = p.quad_config(opts.n_quad);
    let sys = assemble(p, &basis, &nodes, &qcfg)?;

    let scaled = lu_solve(&sys.reduced, &sys.rhs)?;
    let coefficients: Vec<f64> = scaled.iter().zip(basis.lambda()).map(|(s, l)| s / l).collect();
    let power_coeffs = basis.reconstruct(&coefficients)?;

    let condition = condition_diagnostics(&sys, p, &qcfg)?;
    let mut max_residual: f64 = 0.0;
    for &x in &nodes.x {
        max_residual = max_residual.max(residual_of(p, &power_coeffs, x, &qcfg)?.abs());
    }

    Ok(Solution {
        m,
        horizon: p.horizon,
        options: *opts,
        nodes,
        coefficients,
        power_coeffs,
        diagnostics: Diagnostics { condition, max_collocation_residual: max_residual },
    })
}
