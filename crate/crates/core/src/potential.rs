//! Real-analytic potentials on the circle as finite trigonometric series.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// A 1-periodic real potential v(x) = Σ_k c_k cos(2πkx) + Σ_k s_k sin(2πkx).
///
/// `cos_coeffs[k]` is the amplitude at frequency k (k = 0 is the constant
/// term); `sin_coeffs[k]` is the amplitude at frequency k + 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub cos_coeffs: Vec<f64>,
    pub sin_coeffs: Vec<f64>,
}

impl PotentialSpec {
    pub fn new(cos_coeffs: Vec<f64>, sin_coeffs: Vec<f64>) -> Self {
        PotentialSpec {
            cos_coeffs,
            sin_coeffs,
        }
    }

    /// The zero potential (free cocycle).
    pub fn zero() -> Self {
        PotentialSpec::new(Vec::new(), Vec::new())
    }

    /// The constant potential v ≡ c.
    pub fn constant(c: f64) -> Self {
        PotentialSpec::new(vec![c], Vec::new())
    }

    /// A single cosine term a·cos(2πx).
    pub fn cosine(amplitude: f64) -> Self {
        PotentialSpec::new(vec![0.0, amplitude], Vec::new())
    }

    /// Highest frequency with a nonzero coefficient.
    pub fn degree(&self) -> usize {
        let dc = self.cos_coeffs.len().saturating_sub(1);
        let ds = self.sin_coeffs.len();
        dc.max(ds)
    }

    /// Evaluates v at x; x is reduced modulo 1 first.
    pub fn eval(&self, x: f64) -> f64 {
        let x = x - x.floor();
        let mut v = 0.0;
        for (k, &c) in self.cos_coeffs.iter().enumerate() {
            v += c * (TAU * k as f64 * x).cos();
        }
        for (k, &s) in self.sin_coeffs.iter().enumerate() {
            v += s * (TAU * (k + 1) as f64 * x).sin();
        }
        v
    }

    pub fn is_zero(&self) -> bool {
        self.cos_coeffs.iter().all(|&c| c == 0.0) && self.sin_coeffs.iter().all(|&s| s == 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn periodicity() {
        let v = PotentialSpec::new(vec![0.3, 1.5, -0.2], vec![0.7]);
        for i in 0..17 {
            let x = i as f64 / 17.0;
            assert_abs_diff_eq!(v.eval(x), v.eval(x + 3.0), epsilon = 1e-12);
            assert_abs_diff_eq!(v.eval(x), v.eval(x - 2.0), epsilon = 1e-12);
        }
    }

    #[test]
    fn amo_case_is_exact() {
        let v = PotentialSpec::cosine(2.0);
        assert_eq!(v.eval(0.0), 2.0);
        assert_abs_diff_eq!(v.eval(0.5), -2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.eval(0.25), 0.0, epsilon = 1e-15);
        assert_eq!(v.degree(), 1);
    }

    #[test]
    fn zero_and_constant() {
        assert!(PotentialSpec::zero().is_zero());
        let c = PotentialSpec::constant(-1.5);
        assert_eq!(c.eval(0.123), -1.5);
        assert_eq!(c.degree(), 0);
    }
}
