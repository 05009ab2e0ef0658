//! The avalanche principle for products of hyperbolic SL(2,ℝ) matrices:
//! hypothesis checks, the pairwise-product estimator, and measured
//! residuals against the exact rescaled product.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{map_indexed, Exec};
use crate::sl2::{Sl2, DET_TOL};

const RESCALE_THRESHOLD: f64 = 1.3407807929942597e154; // 2^512

/// A sequence A_1…A_n with its hyperbolicity floor μ > 1.
#[derive(Debug, Clone)]
pub struct AvalancheInput {
    pub matrices: Vec<Sl2>,
    pub mu: f64,
}

impl AvalancheInput {
    pub fn new(matrices: Vec<Sl2>, mu: f64) -> Result<Self> {
        if matrices.len() < 2 {
            return Err(Error::InvalidParam("need at least 2 matrices".into()));
        }
        if !(mu > 1.0) {
            return Err(Error::InvalidParam(format!("mu must exceed 1, got {mu}")));
        }
        // The determinant is a difference of products of entries, so its
        // rounding error scales with the squared entry size; use a
        // scale-aware tolerance rather than the absolute DET_TOL.
        let det_tol = |m: &Sl2| {
            let s = m.max_abs_entry();
            DET_TOL.max(64.0 * f64::EPSILON * s * s)
        };
        if let Some(i) = matrices
            .iter()
            .position(|m| (m.det() - 1.0).abs() > det_tol(m))
        {
            return Err(Error::InvalidParam(format!(
                "matrix {i} has determinant {} (not unimodular)",
                matrices[i].det()
            )));
        }
        Ok(AvalancheInput { matrices, mu })
    }
}

/// Per-condition hypothesis flags; failures are data, not errors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HypothesisFlags {
    /// ‖A_j‖ ≥ μ for every j.
    pub norm_floor: bool,
    /// μ > n.
    pub size: bool,
    /// |log‖A_j‖ + log‖A_{j+1}‖ − log‖A_{j+1}A_j‖| < ½ log μ for every j.
    pub pairwise: bool,
    /// Index of the first matrix violating the norm floor, if any.
    pub norm_floor_failure: Option<usize>,
    /// Index j of the first pair violating the non-cancellation bound.
    pub pairwise_failure: Option<usize>,
}

impl HypothesisFlags {
    pub fn all_ok(&self) -> bool {
        self.norm_floor && self.size && self.pairwise
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AvalancheReport {
    pub hypotheses: HypothesisFlags,
    /// Σ pairwise log-norms − Σ interior single log-norms.
    pub estimate: f64,
    /// log-norm of the full product, computed with rescaling.
    pub exact: f64,
    pub residual: f64,
    /// The advisory C·n/μ bound (C₁·N/μ for the factored variant).
    pub bound: f64,
    /// μ·log μ > 27C largeness gate (meaningful for the factored variant).
    pub largeness_gate_ok: bool,
}

/// Checks hypotheses (norm floor, μ > n, pairwise non-cancellation).
pub fn check_hypotheses(input: &AvalancheInput) -> HypothesisFlags {
    let n = input.matrices.len();
    let log_mu = input.mu.ln();
    let norms: Vec<f64> = input.matrices.iter().map(|m| m.spectral_norm()).collect();

    let norm_floor_failure = norms.iter().position(|&nm| nm < input.mu);
    let mut pairwise_failure = None;
    for j in 0..n - 1 {
        let pair = input.matrices[j + 1].mul(&input.matrices[j]);
        let defect = (norms[j].ln() + norms[j + 1].ln() - pair.log_spectral_norm()).abs();
        if defect >= 0.5 * log_mu {
            pairwise_failure = Some(j);
            break;
        }
    }
    HypothesisFlags {
        norm_floor: norm_floor_failure.is_none(),
        size: input.mu > n as f64,
        pairwise: pairwise_failure.is_none(),
        norm_floor_failure,
        pairwise_failure,
    }
}

/// The avalanche prediction for log‖A_n···A_1‖:
/// Σ_{j=1}^{n−1} log‖A_{j+1}A_j‖ − Σ_{j=2}^{n−1} log‖A_j‖.
///
/// Pairwise norms are computed in parallel; the sums run in fixed order.
pub fn avalanche_estimate(input: &AvalancheInput) -> f64 {
    let n = input.matrices.len();
    let pair_logs = map_indexed(n - 1, Exec::Parallel, |j| {
        input.matrices[j + 1].mul(&input.matrices[j]).log_spectral_norm()
    });
    let interior_logs = map_indexed(n.saturating_sub(2), Exec::Parallel, |i| {
        input.matrices[i + 1].log_spectral_norm()
    });
    pair_logs.iter().sum::<f64>() - interior_logs.iter().sum::<f64>()
}

/// log‖A_n···A_1‖ via left-multiplication with norm rescaling.
pub fn exact_log_norm(matrices: &[Sl2]) -> f64 {
    let mut acc = 0.0;
    let mut prod = Sl2::identity();
    for m in matrices {
        prod = m.mul(&prod);
        if prod.max_abs_entry() > RESCALE_THRESHOLD {
            let norm = prod.spectral_norm();
            acc += norm.ln();
            prod = prod.scale(1.0 / norm);
        }
    }
    acc + prod.log_spectral_norm()
}

/// Full report for the plain avalanche principle with configured constant C.
pub fn plain_report(input: &AvalancheInput, c: f64) -> AvalancheReport {
    let hypotheses = check_hypotheses(input);
    let estimate = avalanche_estimate(input);
    let exact = exact_log_norm(&input.matrices);
    let n = input.matrices.len() as f64;
    AvalancheReport {
        hypotheses,
        estimate,
        exact,
        residual: (exact - estimate).abs(),
        bound: c * n / input.mu,
        largeness_gate_ok: input.mu * input.mu.ln() > 27.0 * c,
    }
}

/// The factored-scale variant: N = Π n_i with 3 ≤ n_i < μ/2 for i < s and
/// n_s < μ; the bound is C₁·N/μ with C₁ = 5C.
pub fn factored_check(input: &AvalancheInput, factors: &[u64], c: f64) -> Result<AvalancheReport> {
    if factors.is_empty() {
        return Err(Error::InvalidParam("empty factor list".into()));
    }
    let n = input.matrices.len() as u64;
    let product: u64 = factors.iter().product();
    if product != n {
        return Err(Error::InvalidParam(format!(
            "factors multiply to {product}, sequence length is {n}"
        )));
    }
    let s = factors.len();
    for (i, &f) in factors.iter().enumerate() {
        if i + 1 < s {
            if f < 3 || (f as f64) >= input.mu / 2.0 {
                return Err(Error::InvalidParam(format!(
                    "factor {} = {f} outside [3, mu/2) with mu = {}",
                    i + 1,
                    input.mu
                )));
            }
        } else if f < 2 || (f as f64) >= input.mu {
            return Err(Error::InvalidParam(format!(
                "last factor {f} outside [2, mu) with mu = {}",
                input.mu
            )));
        }
    }
    let hypotheses = check_hypotheses(input);
    let estimate = avalanche_estimate(input);
    let exact = exact_log_norm(&input.matrices);
    Ok(AvalancheReport {
        hypotheses,
        estimate,
        exact,
        residual: (exact - estimate).abs(),
        bound: 5.0 * c * n as f64 / input.mu,
        largeness_gate_ok: input.mu * input.mu.ln() > 27.0 * c,
    })
}

/// Reproducible hyperbolic test ensemble: A_j = R(θ_j)·diag(μ′, 1/μ′)·R(φ_j)
/// with μ′ ∈ [μ, 10μ] log-uniform. In the pair product A_{j+1}A_j the two
/// expanding directions meet through the rotation R(φ_{j+1} + θ_j), so φ_{j+1}
/// is resampled until that composite angle stays 0.15 rad away from π/2
/// (mod π); |cos| ≥ sin(0.15) then keeps the pairwise non-cancellation
/// hypothesis satisfied down to μ = 100.
pub fn random_hyperbolic_sequence(seed: u64, n: usize, mu_floor: f64) -> Vec<Sl2> {
    const MARGIN: f64 = 0.15;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mats = Vec::with_capacity(n);
    let mut prev_theta: Option<f64> = None;
    for _ in 0..n {
        let mu = mu_floor * 10.0f64.powf(rng.gen_range(0.0..1.0));
        let theta = rng.gen_range(0.0..std::f64::consts::PI);
        let phi = loop {
            let p = rng.gen_range(0.0..std::f64::consts::PI);
            let composite = match prev_theta {
                Some(t) => (p + t).rem_euclid(std::f64::consts::PI),
                None => break p,
            };
            if (composite - std::f64::consts::FRAC_PI_2).abs() > MARGIN {
                break p;
            }
        };
        mats.push(
            Sl2::rotation(theta)
                .mul(&Sl2::diag(mu, 1.0 / mu))
                .mul(&Sl2::rotation(phi)),
        );
        prev_theta = Some(theta);
    }
    mats
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_seq(mu: f64, n: usize) -> Vec<Sl2> {
        vec![Sl2::diag(mu, 1.0 / mu); n]
    }

    #[test]
    fn hypotheses_hold_for_commuting_diagonals() {
        let input = AvalancheInput::new(diag_seq(10.0, 5), 10.0).unwrap();
        let flags = check_hypotheses(&input);
        assert!(flags.all_ok(), "{flags:?}");
    }

    #[test]
    fn size_condition_fails_for_long_sequences() {
        let input = AvalancheInput::new(diag_seq(10.0, 20), 10.0).unwrap();
        let flags = check_hypotheses(&input);
        assert!(!flags.size);
        assert!(flags.norm_floor && flags.pairwise);
    }

    #[test]
    fn norm_floor_fails_for_rotation() {
        let input = AvalancheInput::new(
            vec![Sl2::diag(10.0, 0.1), Sl2::rotation(std::f64::consts::FRAC_PI_2)],
            10.0,
        )
        .unwrap();
        let flags = check_hypotheses(&input);
        assert!(!flags.norm_floor);
        assert_eq!(flags.norm_floor_failure, Some(1));
    }

    #[test]
    fn commuting_case_has_zero_residual() {
        let n = 5;
        let input = AvalancheInput::new(diag_seq(10.0, n), 10.0).unwrap();
        let rep = plain_report(&input, 1.0);
        assert!((rep.estimate - n as f64 * 10.0f64.ln()).abs() < 1e-10);
        assert!(rep.residual < 1e-10, "residual = {}", rep.residual);
    }

    #[test]
    fn two_matrices_are_exact() {
        let mats = random_hyperbolic_sequence(3, 2, 100.0);
        let input = AvalancheInput::new(mats, 100.0).unwrap();
        let rep = plain_report(&input, 1.0);
        assert!(rep.residual < 1e-10, "residual = {}", rep.residual);
    }

    #[test]
    fn three_matrices_match_direct_computation() {
        let mats = random_hyperbolic_sequence(11, 3, 1000.0);
        let direct = mats[2].mul(&mats[1]).mul(&mats[0]).log_spectral_norm();
        let input = AvalancheInput::new(mats, 1000.0).unwrap();
        assert!((exact_log_norm(&input.matrices) - direct).abs() < 1e-10);
    }

    #[test]
    fn random_ensemble_respects_bound() {
        for seed in 0..20 {
            let mats = random_hyperbolic_sequence(seed, 100, 1000.0);
            let input = AvalancheInput::new(mats, 1000.0).unwrap();
            let flags = check_hypotheses(&input);
            if !flags.all_ok() {
                continue;
            }
            let rep = plain_report(&input, 1.0);
            let c_fit = rep.residual * input.mu / input.matrices.len() as f64;
            assert!(c_fit < 50.0, "seed {seed}: C_fit = {c_fit}");
        }
    }

    #[test]
    fn residual_scales_like_inverse_mu() {
        let mut means = Vec::new();
        for &mu in &[1e2, 1e3, 1e4] {
            let mut total = 0.0;
            let mut count = 0;
            for seed in 0..50 {
                let mats = random_hyperbolic_sequence(seed, 20, mu);
                let input = AvalancheInput::new(mats, mu).unwrap();
                if !check_hypotheses(&input).all_ok() {
                    continue;
                }
                total += plain_report(&input, 1.0).residual;
                count += 1;
            }
            assert!(count > 30);
            means.push((mu, total / count as f64));
        }
        let slope = (means[2].1.ln() - means[0].1.ln()) / (means[2].0.ln() - means[0].0.ln());
        assert!(slope <= -0.8, "log-log slope = {slope}");
    }

    #[test]
    fn factored_commuting_case() {
        let input = AvalancheInput::new(diag_seq(1e6, 27), 1e6).unwrap();
        let rep = factored_check(&input, &[3, 3, 3], 1.0).unwrap();
        assert!(rep.residual <= 5.0 * 27.0 / 1e6);
        assert!(rep.largeness_gate_ok);
    }

    #[test]
    fn factored_rejects_small_factor() {
        let input = AvalancheInput::new(diag_seq(10.0, 28), 10.0).unwrap();
        assert!(factored_check(&input, &[2, 14], 1.0).is_err());
    }

    #[test]
    fn factored_single_factor_matches_plain() {
        let mats = random_hyperbolic_sequence(5, 9, 1000.0);
        let input = AvalancheInput::new(mats, 1000.0).unwrap();
        let plain = plain_report(&input, 1.0);
        let fact = factored_check(&input, &[9], 1.0).unwrap();
        assert_eq!(plain.residual, fact.residual);
        assert_eq!(plain.estimate, fact.estimate);
    }

    #[test]
    fn factored_random_ensemble() {
        let mu = 1e3;
        let mats = random_hyperbolic_sequence(7, 27, mu);
        let input = AvalancheInput::new(mats, mu).unwrap();
        assert!(check_hypotheses(&input).all_ok());
        let rep = factored_check(&input, &[3, 3, 3], 1.0).unwrap();
        // C_fit well under the calibration ceiling from the plain ensemble.
        assert!(rep.residual <= 5.0 * 50.0 * 27.0 / mu, "residual = {}", rep.residual);
    }
}
