//! Almost Mathieu specifics: periodic-approximant spectra via the trace
//! condition and the max(0, log|λ|/2) verification.

use serde::{Deserialize, Serialize};

use crate::cocycle::{one_step_matrix, CirclePhase};
use crate::diophantine::{continued_fraction, ConvergentList, Omega};
use crate::error::{Error, Result};
use crate::lyapunov::{self, ExtrapolationResult};
use crate::par::{map_indexed, Exec};
use crate::potential::PotentialSpec;
use crate::sl2::Sl2;

pub const DEFAULT_TRACE_TOL: f64 = 1e-9;
pub const DEFAULT_X_SAMPLES: usize = 256;

/// Band spectrum of the periodic approximant H_{λ, p/q}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumApprox {
    pub lambda: f64,
    pub p: u64,
    pub q: u64,
    /// Disjoint closed bands [E_lo, E_hi], sorted.
    pub bands: Vec<(f64, f64)>,
    pub trace_tolerance: f64,
}

impl SpectrumApprox {
    pub fn total_bandwidth(&self) -> f64 {
        self.bands.iter().map(|&(lo, hi)| hi - lo).sum()
    }
}

/// Verification record for the L = max(0, log|λ|/2) target.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Corollary2Report {
    pub lambda: f64,
    pub omega: f64,
    /// Denominator of the approximant the probe energies came from.
    pub q_probe: u64,
    pub energies: Vec<f64>,
    pub l_values: Vec<f64>,
    pub target: f64,
    pub max_abs_deviation: f64,
    /// Indices of energies whose extrapolation disagrees with a half-scale
    /// rerun by more than 3x the extrapolation step.
    pub flagged: Vec<usize>,
}

/// The potential λ·cos(2πx).
pub fn amo_potential(lambda: f64) -> PotentialSpec {
    PotentialSpec::cosine(lambda)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// tr M_q(E, x) for ω = p/q: the discriminant of the periodic operator.
pub fn period_trace(lambda: f64, p: u64, q: u64, energy: f64, x: f64) -> f64 {
    let v = amo_potential(lambda);
    let omega = p as f64 / q as f64;
    let mut phase = CirclePhase::new(x);
    let mut prod = Sl2::identity();
    for _ in 0..q {
        phase.advance(omega);
        prod = one_step_matrix(&v, phase.value(), energy).mul(&prod);
    }
    prod.trace()
}

/// (min, max) of tr M_q(E, x) over a phase grid dense enough to resolve
/// the trace's x-oscillation, which has spatial frequency q.
fn trace_range(lambda: f64, p: u64, q: u64, energy: f64, x_samples: usize) -> (f64, f64) {
    // j / S rather than midpoints: for S divisible by 4 this hits the
    // zeros and extremes of cos(2 pi x).
    let samples = x_samples.max(8 * q as usize);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for j in 0..samples {
        let x = j as f64 / samples as f64;
        let t = period_trace(lambda, p, q, energy, x);
        lo = lo.min(t);
        hi = hi.max(t);
    }
    (lo, hi)
}

/// Spectrum of H_{λ, p/q} as the union over x of the fixed-x periodic
/// spectra. The trace is continuous in x, so E belongs to the union iff
/// tr M_q(E, ·) meets [−2, 2]: min_x tr ≤ 2 and max_x tr ≥ −2. (Testing
/// |tr| ≤ 2 at sampled phases instead would miss the supercritical bands
/// entirely: the fixed-x bands are exponentially thin in q, while the
/// trace oscillates in x with amplitude ~2(λ/2)^q, so crossings of [−2, 2]
/// fall between any fixed set of samples.) Band edges are refined by
/// bisection to `e_resolution`.
pub fn periodic_spectrum(
    lambda: f64,
    p: u64,
    q: u64,
    x_samples: usize,
    e_resolution: f64,
) -> Result<SpectrumApprox> {
    if q == 0 {
        return Err(Error::InvalidParam("q must be positive".into()));
    }
    if gcd(p % q.max(1), q) != 1 && !(p == 0 && q == 1) {
        return Err(Error::InvalidParam(format!("p/q = {p}/{q} not in lowest terms")));
    }
    if !(e_resolution > 0.0) {
        return Err(Error::InvalidParam("e_resolution must be positive".into()));
    }
    let tol = DEFAULT_TRACE_TOL;
    let e_max = 2.0 + lambda.abs();
    let n_coarse = (4096usize).max(64 * q as usize);
    let inside = |e: f64| {
        let (lo, hi) = trace_range(lambda, p, q, e, x_samples);
        lo <= 2.0 + tol && hi >= -2.0 - tol
    };

    // Coarse scan, parallel over the energy grid.
    let flags: Vec<(f64, bool)> = map_indexed(n_coarse + 1, Exec::Parallel, |i| {
        let e = -e_max + 2.0 * e_max * i as f64 / n_coarse as f64;
        (e, inside(e))
    });

    let bisect = |mut e_out: f64, mut e_in: f64| -> f64 {
        while (e_in - e_out).abs() > e_resolution {
            let mid = 0.5 * (e_out + e_in);
            if inside(mid) {
                e_in = mid;
            } else {
                e_out = mid;
            }
        }
        e_in
    };

    let mut bands = Vec::new();
    let mut start: Option<f64> = None;
    for w in 0..flags.len() {
        let (e, is_in) = flags[w];
        match (start, is_in) {
            (None, true) => {
                let lo = if w == 0 { e } else { bisect(flags[w - 1].0, e) };
                start = Some(lo);
            }
            (Some(lo), false) => {
                let hi = bisect(e, flags[w - 1].0);
                bands.push((lo, hi));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(lo) = start {
        bands.push((lo, flags.last().unwrap().0));
    }

    Ok(SpectrumApprox {
        lambda,
        p,
        q,
        bands,
        trace_tolerance: tol,
    })
}

/// Interior probe energies: midpoints of the widest bands first, then
/// quartiles, until `count` energies are collected.
pub fn probe_energies(spectrum: &SpectrumApprox, count: usize) -> Vec<f64> {
    let mut order: Vec<usize> = (0..spectrum.bands.len()).collect();
    order.sort_by(|&i, &j| {
        let wi = spectrum.bands[i].1 - spectrum.bands[i].0;
        let wj = spectrum.bands[j].1 - spectrum.bands[j].0;
        wj.partial_cmp(&wi).unwrap()
    });
    let mut out = Vec::new();
    for &frac in &[0.5, 0.25, 0.75] {
        for &i in &order {
            if out.len() >= count {
                return out;
            }
            let (lo, hi) = spectrum.bands[i];
            let e = lo + frac * (hi - lo);
            if !out.iter().any(|&x: &f64| (x - e).abs() < 1e-12) {
                out.push(e);
            }
        }
    }
    out
}

/// Samples probe energies from the q_probe approximant spectrum, runs the
/// two-scale extrapolation at each, and reports deviations from
/// max(0, log(|λ|/2)).
pub fn corollary2_check(
    lambda: f64,
    omega: &Omega,
    q_probe: u64,
    n: u64,
    m: usize,
    n_energies: usize,
) -> Result<Corollary2Report> {
    let cf = continued_fraction(omega, q_probe)?;
    let &(p, q) = cf
        .convergents
        .iter()
        .find(|&&(_, q)| q == q_probe)
        .ok_or_else(|| {
            Error::InvalidParam(format!("{q_probe} is not a convergent denominator of omega"))
        })?;
    let spectrum = periodic_spectrum(lambda, p, q, DEFAULT_X_SAMPLES, 1e-6)?;
    let energies = probe_energies(&spectrum, n_energies);
    if energies.is_empty() {
        return Err(Error::InvalidParam("approximant spectrum has no bands".into()));
    }
    let v = amo_potential(lambda);
    let w = omega.value();
    let target = if lambda == 0.0 {
        0.0
    } else {
        (lambda.abs() / 2.0).ln().max(0.0)
    };

    let runs: Vec<(ExtrapolationResult, ExtrapolationResult)> =
        map_indexed(energies.len(), Exec::Parallel, |i| {
            let e = energies[i];
            let full = lyapunov::extrapolate_l(&v, w, e, n, m).expect("validated grid");
            let half = lyapunov::extrapolate_l(&v, w, e, (n / 2).max(1), m).expect("validated grid");
            (full, half)
        });

    let mut l_values = Vec::with_capacity(runs.len());
    let mut flagged = Vec::new();
    let mut max_abs_deviation = 0.0f64;
    for (i, (full, half)) in runs.iter().enumerate() {
        l_values.push(full.extrapolated);
        let step = (full.l_2n0 - full.l_n0).abs();
        if (full.extrapolated - half.extrapolated).abs() > 3.0 * step.max(1e-12) {
            flagged.push(i);
        }
        max_abs_deviation = max_abs_deviation.max((full.extrapolated - target).abs());
    }

    Ok(Corollary2Report {
        lambda,
        omega: w,
        q_probe,
        energies,
        l_values,
        target,
        max_abs_deviation,
        flagged,
    })
}

/// L(E, p_s/q_s) along the convergents of an irrational frequency, all via
/// the same extrapolation pipeline (the construction applies for rational
/// ω as well).
pub fn approximant_l_gap(
    lambda: f64,
    cf: &ConvergentList,
    energy: f64,
    n: u64,
    m: usize,
) -> Result<Vec<(u64, f64)>> {
    let v = amo_potential(lambda);
    let entries: Vec<(u64, f64)> = map_indexed(cf.convergents.len(), Exec::Parallel, |i| {
        let (p, q) = cf.convergents[i];
        let omega = p as f64 / q as f64;
        let ext = lyapunov::extrapolate_l(&v, omega, energy, n, m).expect("validated grid");
        (q, ext.extrapolated)
    });
    Ok(entries)
}

/// Discontinuity probe at a rational frequency, against the perturbed
/// frequency p/q + δ with δ along a Diophantine direction.
#[derive(Debug, Clone, Serialize)]
pub struct DiscontinuityGap {
    /// |L(E, p/q) − L(E, p/q + δ)| of the x-averaged exponents.
    pub mean_gap: f64,
    /// sup over the phase grid of |u_{p/q}(x) − u_{p/q+δ}(x)|. At a
    /// rational frequency the per-phase rate splits into elliptic phases
    /// (rate 0) and hyperbolic ones, while at the nearby irrational the
    /// profile is nearly flat, so this is where the jump shows: the
    /// x-average alone can cancel to near zero (it does for q = 1).
    pub sup_gap: f64,
}

/// Compares the finite-scale exponents at ω = p/q and ω = p/q + δ on a
/// shared phase grid; the probe for the discontinuity of L in ω at
/// rationals.
pub fn rational_discontinuity_gap(
    lambda: f64,
    p: u64,
    q: u64,
    energy: f64,
    delta: f64,
    n: u64,
    m: usize,
) -> Result<DiscontinuityGap> {
    let v = amo_potential(lambda);
    let base = p as f64 / q as f64;
    let rational = lyapunov::per_site_profile(&v, base, energy, n, m)?;
    let perturbed = lyapunov::per_site_profile(&v, base + delta, energy, n, m)?;
    let mean_gap = (rational.mean() - perturbed.mean()).abs();
    let sup_gap = rational
        .values
        .iter()
        .zip(&perturbed.values)
        .map(|(&a, &b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    Ok(DiscontinuityGap { mean_gap, sup_gap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn amo_potential_values() {
        assert!(amo_potential(0.0).is_zero());
        assert_eq!(amo_potential(2.0).eval(0.0), 2.0);
        assert_abs_diff_eq!(amo_potential(4.0).eval(0.5), -4.0, epsilon = 1e-12);
    }

    #[test]
    fn free_laplacian_band() {
        let s = periodic_spectrum(0.0, 1, 3, 64, 1e-6).unwrap();
        assert_eq!(s.bands.len(), 1);
        let (lo, hi) = s.bands[0];
        assert_abs_diff_eq!(lo, -2.0, epsilon = 1e-5);
        assert_abs_diff_eq!(hi, 2.0, epsilon = 1e-5);
    }

    #[test]
    fn q2_closed_form_lambda2() {
        let s = periodic_spectrum(2.0, 1, 2, 256, 1e-7).unwrap();
        assert_eq!(s.bands.len(), 1);
        let edge = (8.0f64).sqrt();
        assert_abs_diff_eq!(s.bands[0].0, -edge, epsilon = 1e-6);
        assert_abs_diff_eq!(s.bands[0].1, edge, epsilon = 1e-6);
    }

    #[test]
    fn q2_closed_form_lambda4() {
        let s = periodic_spectrum(4.0, 1, 2, 256, 1e-7).unwrap();
        assert_eq!(s.bands.len(), 1);
        let edge = (20.0f64).sqrt();
        assert_abs_diff_eq!(s.bands[0].0, -edge, epsilon = 1e-6);
        assert_abs_diff_eq!(s.bands[0].1, edge, epsilon = 1e-6);
    }

    #[test]
    fn rejects_degenerate_rationals() {
        assert!(periodic_spectrum(1.0, 1, 0, 64, 1e-6).is_err());
        assert!(periodic_spectrum(1.0, 2, 4, 64, 1e-6).is_err());
    }

    #[test]
    fn band_count_at_most_q() {
        for q in [2u64, 3, 5, 8] {
            let s = periodic_spectrum(1.5, 1, q, 128, 1e-5).unwrap();
            assert!(!s.bands.is_empty());
            assert!(s.bands.len() <= q as usize, "q = {q}: {} bands", s.bands.len());
        }
    }

    #[test]
    fn spectral_symmetries() {
        for q in [2u64, 3] {
            let s_plus = periodic_spectrum(1.3, 1, q, 256, 1e-6).unwrap();
            let s_minus = periodic_spectrum(-1.3, 1, q, 256, 1e-6).unwrap();
            assert_eq!(s_plus.bands.len(), s_minus.bands.len());
            for (b1, b2) in s_plus.bands.iter().zip(&s_minus.bands) {
                assert_abs_diff_eq!(b1.0, b2.0, epsilon = 1e-4);
                assert_abs_diff_eq!(b1.1, b2.1, epsilon = 1e-4);
            }
            // E -> -E symmetry: the band list reversed and negated.
            for (i, &(lo, hi)) in s_plus.bands.iter().enumerate() {
                let (mlo, mhi) = s_plus.bands[s_plus.bands.len() - 1 - i];
                assert_abs_diff_eq!(lo, -mhi, epsilon = 1e-4);
                assert_abs_diff_eq!(hi, -mlo, epsilon = 1e-4);
            }
        }
    }

    #[test]
    fn probe_energies_are_interior() {
        let s = periodic_spectrum(4.0, 1, 2, 128, 1e-6).unwrap();
        let probes = probe_energies(&s, 3);
        assert_eq!(probes.len(), 3);
        for e in probes {
            assert!(s.bands.iter().any(|&(lo, hi)| e > lo && e < hi));
        }
    }

    #[test]
    fn bands_are_sorted_and_disjoint() {
        let s = periodic_spectrum(1.5, 2, 5, 128, 1e-6).unwrap();
        for w in s.bands.windows(2) {
            assert!(w[0].1 < w[1].0);
        }
    }
}
