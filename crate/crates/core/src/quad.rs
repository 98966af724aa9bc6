//! Gauss–Jacobi rules on (0, 1) and the weakly singular moment integrals
//!
//! ```text
//! ∫_0^x (x - t)^(-α) k(x, t) t^i dt
//! ```
//!
//! After `t = x s` the Abel factor `(1 - s)^(-α)` and the monomial `s^i`
//! (together with an optional kernel factor `s^τ`) are absorbed into the
//! Jacobi weight, leaving only the smooth part of the kernel as integrand.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::{Arc, Mutex, OnceLock};

use thiserror::Error;

use crate::expr::{EvalError, Expr};
use crate::specfun;

pub const DEFAULT_QUAD_NODES: usize = 32;

const MAX_QL_ITERATIONS: usize = 60;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("Jacobi exponent {name} = {value} must be finite and greater than -1")]
    Exponent { name: &'static str, value: f64 },
    #[error("quadrature needs at least one node")]
    NoNodes,
    #[error("singularity exponent {0} outside [0, 1)")]
    SingularExponent(f64),
    #[error("integration endpoint must be positive and finite, got {0}")]
    Endpoint(f64),
    #[error("eigenvalue iteration did not converge for n = {0}")]
    NoConvergence(usize),
    #[error("kernel evaluation failed at (x = {x}, t = {t}): {source}")]
    Kernel { x: f64, t: f64, source: EvalError },
}

/// n-point Gauss rule for the weight (1 - s)^a s^b on (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiRule {
    pub a: f64,
    pub b: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl JacobiRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Σ w_k f(s_k).
    pub fn integrate<F>(&self, mut f: F) -> f64
    where
        F: FnMut(f64) -> f64,
    {
        self.nodes.iter().zip(&self.weights).map(|(&s, &w)| w * f(s)).sum()
    }

    /// `node,weight` CSV with round-trip (shortest exact) decimal formatting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node,weight\n");
        for (s, w) in self.nodes.iter().zip(&self.weights) {
            let _ = writeln!(out, "{s},{w}");
        }
        out
    }
}

/// Kernel-dependent quadrature settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    pub n_quad: usize,
    /// τ such that k(x, t) behaves like t^τ times a smooth function near t = 0.
    pub t_exponent: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self { n_quad: DEFAULT_QUAD_NODES, t_exponent: 0.0 }
    }
}

impl QuadConfig {
    pub fn new(n_quad: usize, t_exponent: f64) -> Self {
        Self { n_quad, t_exponent }
    }

    fn validate(&self) -> Result<(), QuadError> {
        if self.n_quad == 0 {
            return Err(QuadError::NoNodes);
        }
        if !(self.t_exponent > -1.0) || !self.t_exponent.is_finite() {
            return Err(QuadError::Exponent { name: "t_exponent", value: self.t_exponent });
        }
        Ok(())
    }
}

/// Builds the Gauss–Jacobi rule by the Golub–Welsch method: the nodes are
/// the eigenvalues of the symmetric Jacobi matrix of the shifted Jacobi
/// polynomials, the weights μ0·v_0² come from the first eigenvector
/// components.
pub fn gauss_jacobi(a: f64, b: f64, n: usize) -> Result<JacobiRule, QuadError> {
    if !(a > -1.0) || !a.is_finite() {
        return Err(QuadError::Exponent { name: "a", value: a });
    }
    if !(b > -1.0) || !b.is_finite() {
        return Err(QuadError::Exponent { name: "b", value: b });
    }
    if n == 0 {
        return Err(QuadError::NoNodes);
    }

    // Recurrence for P_k^(a, b) on [-1, 1], mapped to s = (1 + x) / 2.
    let ab = a + b;
    let mut diag = Vec::with_capacity(n);
    let mut off = vec![0.0; n];
    for k in 0..n {
        let kf = k as f64;
        let d = if k == 0 {
            (b - a) / (ab + 2.0)
        } else {
            let s = 2.0 * kf + ab;
            (b * b - a * a) / (s * (s + 2.0))
        };
        diag.push(0.5 * (1.0 + d));
        if k + 1 < n {
            let j = kf + 1.0;
            let s = 2.0 * j + ab;
            let sq = if k == 0 {
                4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab) * (2.0 + ab) * (3.0 + ab))
            } else {
                4.0 * j * (j + a) * (j + b) * (j + ab) / (s * s * (s + 1.0) * (s - 1.0))
            };
            off[k] = 0.5 * sq.sqrt();
        }
    }

    let mut first = vec![0.0; n];
    first[0] = 1.0;
    tridiagonal_ql(&mut diag, &mut off, &mut first).ok_or(QuadError::NoConvergence(n))?;

    let mu0 = specfun::beta(a + 1.0, b + 1.0).map_err(|_| QuadError::Exponent { name: "a", value: a })?;
    let mut pairs: Vec<(f64, f64)> = diag.into_iter().zip(first).map(|(s, v)| (s, mu0 * v * v)).collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    let (nodes, weights) = pairs.into_iter().unzip();
    Ok(JacobiRule { a, b, nodes, weights })
}

/// Implicit QL with Wilkinson shifts on a symmetric tridiagonal matrix.
///
/// `d` holds the diagonal, `e[i]` couples rows i and i+1 (`e[n-1]` unused).
/// On return `d` holds the eigenvalues and `z` the first components of the
/// corresponding normalized eigenvectors, provided `z` starts as e_1.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64], z: &mut [f64]) -> Option<()> {
    let n = d.len();
    if n == 0 {
        return Some(());
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_QL_ITERATIONS {
                return None;
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Some(())
}

type RuleKey = (u64, u64, usize);

fn rule_cache() -> &'static Mutex<HashMap<RuleKey, Arc<JacobiRule>>> {
    static CACHE: OnceLock<Mutex<HashMap<RuleKey, Arc<JacobiRule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Memoized [`gauss_jacobi`], keyed by the exact bit patterns of (a, b) and n.
pub fn cached_rule(a: f64, b: f64, n: usize) -> Result<Arc<JacobiRule>, QuadError> {
    let key = (a.to_bits(), b.to_bits(), n);
    if let Some(rule) = rule_cache().lock().unwrap_or_else(|p| p.into_inner()).get(&key) {
        return Ok(Arc::clone(rule));
    }
    // Built outside the lock; a concurrent duplicate build yields the same rule.
    let rule = Arc::new(gauss_jacobi(a, b, n)?);
    let mut cache = rule_cache().lock().unwrap_or_else(|p| p.into_inner());
    Ok(Arc::clone(cache.entry(key).or_insert(rule)))
}

fn check_moment_args(alpha_sing: f64, x: f64, cfg: &QuadConfig) -> Result<(), QuadError> {
    if !(0.0..1.0).contains(&alpha_sing) {
        return Err(QuadError::SingularExponent(alpha_sing));
    }
    if !(x > 0.0) || !x.is_finite() {
        return Err(QuadError::Endpoint(x));
    }
    cfg.validate()
}

/// Smooth part k(x, t) / t^τ of the kernel at t = x s.
fn reduced_kernel(kernel: &Expr, x: f64, s: f64, tau: f64) -> Result<f64, QuadError> {
    let t = x * s;
    let k = kernel.eval(x, t).map_err(|source| QuadError::Kernel { x, t, source })?;
    Ok(if tau == 0.0 { k } else { k / t.powf(tau) })
}

/// ∫_0^x (x - t)^(-α) k(x, t) t^i dt.
///
/// Computed as `x^(1-α+i+τ) Σ w_k k(x, x s_k) / (x s_k)^τ` with the
/// Gauss–Jacobi rule for (1 - s)^(-α) s^(i+τ). All nodes are interior, so
/// the division by (x s_k)^τ never meets zero.
pub fn singular_moment(kernel: &Expr, alpha_sing: f64, i: usize, x: f64, cfg: &QuadConfig) -> Result<f64, QuadError> {
    check_moment_args(alpha_sing, x, cfg)?;
    let tau = cfg.t_exponent;
    let rule = cached_rule(-alpha_sing, i as f64 + tau, cfg.n_quad)?;
    let mut sum = 0.0;
    for (&s, &w) in rule.nodes.iter().zip(&rule.weights) {
        sum += w * reduced_kernel(kernel, x, s, tau)?;
    }
    Ok(x.powf(1.0 - alpha_sing + i as f64 + tau) * sum)
}

/// ∫_0^x |(x - t)^(-α) k(x, t)| dt, by the same transformed rule with i = 0.
pub fn l1_kernel_norm(kernel: &Expr, alpha_sing: f64, x: f64, cfg: &QuadConfig) -> Result<f64, QuadError> {
    check_moment_args(alpha_sing, x, cfg)?;
    let tau = cfg.t_exponent;
    let rule = cached_rule(-alpha_sing, tau, cfg.n_quad)?;
    let mut sum = 0.0;
    for (&s, &w) in rule.nodes.iter().zip(&rule.weights) {
        sum += w * reduced_kernel(kernel, x, s, tau)?.abs();
    }
    Ok(x.powf(1.0 - alpha_sing + tau) * sum)
}
