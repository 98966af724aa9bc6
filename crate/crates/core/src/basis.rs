//! Krall-Laguerre basis functions and the power-basis reconstruction.
//!
//! The degree-`m` Krall-Laguerre polynomial is
//!
//! ```text
//! K_m(x) = Σ_{i=0}^{m} λ_i x^i,
//! λ_i    = (-1)^i / (i+1)! · C(m, i) · [i(α + m + 1) + α]
//! ```
//!
//! and the basis functions are the individual terms `p_{m,i}(x) = λ_i x^i`.
//! With `α = 2` the first few are `K_1 = 2 - 3x`, `K_2 = 2 - 7x + 2x²`, ...

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::ToPrimitive;
use thiserror::Error;

use crate::specfun::{binomial, factorial};

/// Largest supported degree.
pub const MAX_DEGREE: usize = 60;

/// Basis parameter reproducing the tabulated K_1 ... K_5.
pub const DEFAULT_ALPHA_KL: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BasisError {
    #[error("degree {0} exceeds the supported maximum {MAX_DEGREE}")]
    DegreeTooLarge(usize),
    #[error("basis parameter must be positive and finite, got {0}")]
    InvalidAlpha(f64),
    #[error("basis index {index} out of range for degree {m}")]
    IndexOutOfRange { index: usize, m: usize },
    #[error("expected {expected} coefficients, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrallLaguerreBasis {
    m: usize,
    alpha_kl: f64,
    lambda: Vec<f64>,
}

impl KrallLaguerreBasis {
    pub fn new(m: usize, alpha_kl: f64) -> Result<Self, BasisError> {
        if m > MAX_DEGREE {
            return Err(BasisError::DegreeTooLarge(m));
        }
        if !(alpha_kl > 0.0) || !alpha_kl.is_finite() {
            return Err(BasisError::InvalidAlpha(alpha_kl));
        }
        let lambda = (0..=m).map(|i| coefficient(m, i, alpha_kl)).collect();
        Ok(Self { m, alpha_kl, lambda })
    }

    pub fn degree(&self) -> usize {
        self.m
    }

    pub fn alpha_kl(&self) -> f64 {
        self.alpha_kl
    }

    /// λ_0 ... λ_m.
    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// p_{m,i}(x) = λ_i x^i.
    pub fn eval_basis_fn(&self, i: usize, x: f64) -> Result<f64, BasisError> {
        let l = self.lambda.get(i).ok_or(BasisError::IndexOutOfRange { index: i, m: self.m })?;
        Ok(l * x.powi(i as i32))
    }

    /// K_m(x).
    pub fn eval_full_poly(&self, x: f64) -> f64 {
        eval_power_poly(&self.lambda, x)
    }

    /// Maps coefficients `c` in the p_{m,i} basis to power-basis coefficients
    /// `a_i = c_i λ_i`, so that `Σ a_i x^i = Σ c_i p_{m,i}(x)`.
    pub fn reconstruct(&self, c: &[f64]) -> Result<Vec<f64>, BasisError> {
        if c.len() != self.lambda.len() {
            return Err(BasisError::LengthMismatch { expected: self.lambda.len(), got: c.len() });
        }
        Ok(c.iter().zip(&self.lambda).map(|(ci, li)| ci * li).collect())
    }
}

/// λ_i for degree m, with the integer part C(m, i)/(i+1)! reduced exactly
/// before a single floating-point division.
fn coefficient(m: usize, i: usize, alpha_kl: f64) -> f64 {
    // m ≤ MAX_DEGREE keeps C(m, i) inside u64.
    let binom = BigUint::from(binomial(m as i64, i as i64).expect("m bounded by MAX_DEGREE"));
    let fact = factorial(i as u32 + 1);
    let g = binom.gcd(&fact);
    let num = (binom / &g).to_f64().unwrap_or(f64::INFINITY);
    let den = (fact / &g).to_f64().unwrap_or(f64::INFINITY);
    let bracket = i as f64 * (alpha_kl + m as f64 + 1.0) + alpha_kl;
    let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
    sign * (num * bracket) / den
}

/// Σ a_i x^i by Horner's rule.
pub fn eval_power_poly(a: &[f64], x: f64) -> f64 {
    a.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    // Tabulated K_1 ... K_5 as exact fractions (numerator, denominator).
    const LISTED: [&[(i64, i64)]; 5] = [
        &[(2, 1), (-3, 1)],
        &[(2, 1), (-7, 1), (2, 1)],
        &[(2, 1), (-12, 1), (7, 1), (-5, 6)],
        &[(2, 1), (-18, 1), (16, 1), (-23, 6), (1, 4)],
        &[(2, 1), (-25, 1), (30, 1), (-65, 6), (17, 12), (-7, 120)],
    ];

    #[test]
    fn reproduces_listed_polynomials() {
        for (k, listed) in LISTED.iter().enumerate() {
            let basis = KrallLaguerreBasis::new(k + 1, 2.0).unwrap();
            assert_eq!(basis.lambda().len(), k + 2);
            for (got, &(p, q)) in basis.lambda().iter().zip(listed.iter()) {
                assert_eq!(*got, p as f64 / q as f64, "K_{}", k + 1);
            }
        }
    }

    #[test]
    fn degree_zero_follows_the_formula() {
        // K_0 = α, not the tabulated constant 1.
        assert_eq!(KrallLaguerreBasis::new(0, 2.0).unwrap().lambda(), &[2.0]);
    }

    #[test]
    fn basis_function_values() {
        let k2 = KrallLaguerreBasis::new(2, 2.0).unwrap();
        assert_eq!(k2.eval_basis_fn(2, 1.0).unwrap(), 2.0);
        assert_eq!(k2.eval_basis_fn(0, 0.0).unwrap(), 2.0);
        let k4 = KrallLaguerreBasis::new(4, 2.0).unwrap();
        assert_eq!(k4.eval_basis_fn(3, 1.0).unwrap(), -23.0 / 6.0);
        assert_eq!(k4.eval_basis_fn(5, 1.0), Err(BasisError::IndexOutOfRange { index: 5, m: 4 }));
    }

    #[test]
    fn full_polynomial_values() {
        assert_eq!(KrallLaguerreBasis::new(2, 2.0).unwrap().eval_full_poly(0.0), 2.0);
        assert!(KrallLaguerreBasis::new(1, 2.0).unwrap().eval_full_poly(2.0 / 3.0).abs() < 1e-15);
        // 2 - 25 + 30 - 65/6 + 17/12 - 7/120 = -297/120
        assert_relative_eq!(
            KrallLaguerreBasis::new(5, 2.0).unwrap().eval_full_poly(1.0),
            -297.0 / 120.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn reconstruction() {
        let b = KrallLaguerreBasis::new(1, 2.0).unwrap();
        assert_eq!(b.reconstruct(&[1.0, 1.0]).unwrap(), vec![2.0, -3.0]);
        assert_eq!(b.reconstruct(&[0.0, -1.0 / 3.0]).unwrap(), vec![0.0, 1.0]);
        assert_eq!(b.reconstruct(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(b.reconstruct(&[1.0]), Err(BasisError::LengthMismatch { expected: 2, got: 1 }));
    }

    #[test]
    fn power_poly() {
        assert_eq!(eval_power_poly(&[0.0, 1.0], 0.7), 0.7);
        assert!(eval_power_poly(&[2.0, -3.0], 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(eval_power_poly(&[1.0, 2.0, 1.0], -1.0), 0.0);
        assert_eq!(eval_power_poly(&[], 3.0), 0.0);
    }

    #[test]
    fn construction_errors() {
        assert_eq!(KrallLaguerreBasis::new(61, 2.0), Err(BasisError::DegreeTooLarge(61)));
        assert!(KrallLaguerreBasis::new(3, 0.0).is_err());
        assert!(KrallLaguerreBasis::new(3, -1.0).is_err());
        assert!(KrallLaguerreBasis::new(3, f64::NAN).is_err());
        let top = KrallLaguerreBasis::new(MAX_DEGREE, 2.0).unwrap();
        assert!(top.lambda().iter().all(|l| l.is_finite() && *l != 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn coefficients_alternate_in_sign(m in 0usize..=20, alpha in 1e-3f64..=10.0) {
            let b = KrallLaguerreBasis::new(m, alpha).unwrap();
            prop_assert_eq!(b.lambda().len(), m + 1);
            for (i, l) in b.lambda().iter().enumerate() {
                prop_assert!(*l != 0.0);
                prop_assert_eq!(l.is_sign_negative(), i % 2 == 1);
            }
        }

        #[test]
        fn full_poly_matches_reconstruction_of_ones(m in 0usize..=20, x in 0.0f64..=1.0) {
            let b = KrallLaguerreBasis::new(m, 2.0).unwrap();
            let a = b.reconstruct(&vec![1.0; m + 1]).unwrap();
            let direct = b.eval_full_poly(x);
            let via = eval_power_poly(&a, x);
            prop_assert!((direct - via).abs() <= 1e-14 * direct.abs().max(f64::MIN_POSITIVE));
        }
    }
}
