//! Base-scale selection, the approximant/scale ladder with its two cases,
//! and measured residuals for the multiscale convergence estimates.

use serde::{Deserialize, Serialize};

use crate::diophantine::{next_approximant_above, ApproximantQuery, ConvergentList};
use crate::error::{Error, Result};
use crate::lyapunov;
use crate::potential::PotentialSpec;

/// A finite-scale exponent as a function of N. Production code backs this
/// with a grid evaluation; tests feed synthetic scale laws.
pub trait ScaleFn {
    fn l(&self, n: u64) -> f64;
}

impl<F: Fn(u64) -> f64> ScaleFn for F {
    fn l(&self, n: u64) -> f64 {
        self(n)
    }
}

/// Grid-backed L_N evaluator on a fixed (potential, ω, E, M).
#[derive(Debug, Clone)]
pub struct GridEvaluator {
    pub v: PotentialSpec,
    pub omega: f64,
    pub energy: f64,
    pub m: usize,
}

impl GridEvaluator {
    pub fn new(v: PotentialSpec, omega: f64, energy: f64, m: usize) -> Result<Self> {
        if m < lyapunov::MIN_GRID {
            return Err(Error::GridTooCoarse(m));
        }
        Ok(GridEvaluator { v, omega, energy, m })
    }
}

impl ScaleFn for GridEvaluator {
    fn l(&self, n: u64) -> f64 {
        lyapunov::finite_scale_l(&self.v, self.omega, self.energy, n, self.m)
            .expect("grid validated at construction")
            .value
    }
}

/// Diagnostic exponent constants. The source material fixes only their
/// ordering c′ ≫ c₁ > c₂ > c₃ > 0; the values here feed advisory bounds
/// only, never assertions.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScheduleConstants {
    pub c_prime: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// C in the κ^{-C} base-scale window cap.
    pub cap_exponent: f64,
    /// C in the C·κ⁻²·q scale floor.
    pub kappa_sq_c: f64,
}

impl Default for ScheduleConstants {
    fn default() -> Self {
        ScheduleConstants {
            c_prime: 0.1,
            c1: 0.05,
            c2: 0.02,
            c3: 0.01,
            cap_exponent: 3.0,
            kappa_sq_c: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseTag {
    Base,
    CaseI,
    CaseII,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleLevel {
    pub s: usize,
    pub q: u64,
    pub n: u64,
    pub case_tag: CaseTag,
    /// Case II first intermediate scale, a multiple of the preceding
    /// approximant q.
    pub intermediate_n: Option<u64>,
    /// Case II second scale N″ of the form 3^b times the intermediate scale.
    pub second_scale_n: Option<u64>,
    /// The approximant q preceding q_{s} used for the intermediate scales.
    pub intermediate_q: Option<u64>,
    /// q_{s-1} < N_{s-1} < q_s interleaving held when this level was added.
    pub interleaving_ok: bool,
    /// Set when the intermediate scale cannot be a multiple of both its q
    /// and the previous ladder scale; the q-divisibility is kept.
    pub divisibility_conflict: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiscaleSchedule {
    pub kappa: f64,
    pub levels: Vec<ScheduleLevel>,
    pub constants: ScheduleConstants,
    /// True when the ladder stopped because the next threshold exceeded the
    /// approximant list or the configured budget.
    pub truncated: bool,
}

/// Left sides of the step estimates at one ladder level, plus the advisory
/// exponential bounds computed from the configured constants.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepResiduals {
    /// Weighted three-scale combination with m = N_{s+1}/N_s.
    pub lemma6: f64,
    /// |L_{N'} + L_N − 2L_{2N}| at the scales the ladder pairs for this step.
    pub lemma7: f64,
    /// Intermediate-to-second-scale residual; present only when the level
    /// introduced a distinct second scale.
    pub lemma8: Option<f64>,
    pub step47: f64,
    pub step48: f64,
    pub step49: f64,
    pub bound47: f64,
    pub bound48: f64,
    pub bound49: f64,
    /// ln ln(N'/N) < (c′/2)κq ceiling for the Lemma 7 application.
    pub lemma7_ceiling_ok: bool,
}

/// Outcome of the base-scale search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BaseScale {
    Found {
        n0: u64,
        /// q0 > C·κ⁻² gate; recorded, not enforced, since desk-scale runs
        /// routinely sit below it.
        q0_gate_ok: bool,
    },
    /// No N in the window had L_{2N} > (9/10)L_N: the exponent is likely
    /// not in the positive regime at this κ.
    NotFound { q0_gate_ok: bool },
}

/// Scans the (C·κ⁻²·q₀, κ^{-C}·q₀) window (by doubling from the lower edge)
/// for the smallest tested N with L_{2N} > (9/10)·L_N.
pub fn choose_base_scale(
    law: &impl ScaleFn,
    kappa: f64,
    q0: u64,
    constants: &ScheduleConstants,
    max_scan_n: u64,
) -> Result<BaseScale> {
    if !(kappa > 0.0 && kappa < 0.01) {
        return Err(Error::InvalidParam(format!(
            "kappa must lie in (0, 1/100), got {kappa}"
        )));
    }
    let q0f = q0 as f64;
    let q0_gate_ok = q0f > constants.kappa_sq_c * kappa.powi(-2);
    let lower = constants.kappa_sq_c * kappa.powi(-2) * q0f;
    let upper = kappa.powf(-constants.cap_exponent) * q0f;
    let mut n = (lower.floor() as u64).saturating_add(1);
    if n > max_scan_n {
        return Err(Error::BudgetExhausted {
            needed: n,
            budget: max_scan_n,
        });
    }
    loop {
        let l_n = law.l(n);
        // The construction assumes L > 100κ; a finite-scale value at or
        // below that is already outside the positive-exponent regime.
        if l_n <= 100.0 * kappa {
            return Ok(BaseScale::NotFound { q0_gate_ok });
        }
        if law.l(2 * n) > 0.9 * l_n {
            return Ok(BaseScale::Found { n0: n, q0_gate_ok });
        }
        let next = n.saturating_mul(2);
        if (next as f64) >= upper {
            return Ok(BaseScale::NotFound { q0_gate_ok });
        }
        if next > max_scan_n {
            return Err(Error::BudgetExhausted {
                needed: next,
                budget: max_scan_n,
            });
        }
        n = next;
    }
}

fn round_up_to_multiple(target: f64, base: u64) -> Option<u64> {
    if target > 9.0e18 {
        return None;
    }
    let k = (target / base as f64).ceil().max(1.0);
    if k > 9.0e18 / base as f64 {
        return None;
    }
    Some(k as u64 * base)
}

/// Builds the approximant/scale ladder: q_{s+1} is the smallest convergent
/// with ln q_{s+1} > q_s, each N is a multiple of its predecessor above the
/// C·κ⁻²·q floor, and levels are tagged Case I/II by whether
/// ln q_{s+1} < 10·q_s.
pub fn build_schedule(
    cf: &ConvergentList,
    kappa: f64,
    n0: u64,
    level_budget: usize,
    q_budget_log: f64,
    constants: &ScheduleConstants,
) -> Result<MultiscaleSchedule> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::InvalidParam(format!(
            "kappa must lie in (0, 1), got {kappa}"
        )));
    }
    if n0 == 0 {
        return Err(Error::InvalidParam("N0 must be >= 1".into()));
    }
    // Base approximant: the largest stored q below N0 (q0 < N0), falling
    // back to the smallest convergent.
    let q0 = cf
        .convergents
        .iter()
        .map(|&(_, q)| q)
        .filter(|&q| q < n0)
        .max()
        .or_else(|| cf.convergents.first().map(|&(_, q)| q))
        .ok_or_else(|| Error::InvalidParam("empty convergent list".into()))?;

    let mut levels = vec![ScheduleLevel {
        s: 0,
        q: q0,
        n: n0,
        case_tag: CaseTag::Base,
        intermediate_n: None,
        second_scale_n: None,
        intermediate_q: None,
        interleaving_ok: q0 < n0,
        divisibility_conflict: false,
    }];
    let mut truncated = false;

    while levels.len() < level_budget + 1 {
        let prev = levels.last().unwrap();
        let (q_s, n_s) = (prev.q, prev.n);
        let threshold = q_s as f64; // ln q_{s+1} > q_s
        if threshold > q_budget_log {
            truncated = true;
            break;
        }
        let (_p_next, q_next) = match next_approximant_above(cf, threshold) {
            ApproximantQuery::Found { p, q } => (p, q),
            ApproximantQuery::Exhausted => {
                truncated = true;
                break;
            }
        };
        let ln_q_next = (q_next as f64).ln();
        let case_tag = if ln_q_next < 10.0 * q_s as f64 {
            CaseTag::CaseI
        } else {
            CaseTag::CaseII
        };
        let floor = (constants.kappa_sq_c * kappa.powi(-2) * q_next as f64).max(q_next as f64);
        let n_next = match round_up_to_multiple(floor, n_s) {
            Some(n) => n,
            None => {
                truncated = true;
                break;
            }
        };

        let mut intermediate_n = None;
        let mut second_scale_n = None;
        let mut intermediate_q = None;
        let mut divisibility_conflict = false;
        if case_tag == CaseTag::CaseII {
            // Approximant preceding q_{s+1}.
            let q_mid = cf
                .convergents
                .iter()
                .map(|&(_, q)| q)
                .filter(|&q| q < q_next)
                .max()
                .unwrap_or(q_s);
            intermediate_q = Some(q_mid);
            let ln_target = (kappa.powi(-2) * q_mid as f64)
                .ln()
                .max(5.0 * constants.c1 * kappa * q_s as f64);
            if ln_target < 42.0 {
                if let Some(n_int) = round_up_to_multiple(ln_target.exp(), q_mid) {
                    divisibility_conflict = n_int % n_s != 0;
                    intermediate_n = Some(n_int);
                    // Second scale: N″ = N unless q_{s+1} is beyond e^{4q},
                    // then N″ ~ e^{−2q}·q_{s+1} of the form 3^b·N.
                    if ln_q_next <= 4.0 * q_mid as f64 {
                        second_scale_n = Some(n_int);
                    } else {
                        let ln_second = ln_q_next - 2.0 * q_mid as f64;
                        let b = ((ln_second - (n_int as f64).ln()) / 3.0f64.ln())
                            .round()
                            .max(0.0);
                        let scaled = n_int as f64 * 3.0f64.powf(b);
                        if scaled < 9.0e18 {
                            second_scale_n = Some(3.0f64.powf(b) as u64 * n_int);
                        }
                    }
                }
            }
        }

        let s = levels.len();
        levels.push(ScheduleLevel {
            s,
            q: q_next,
            n: n_next,
            case_tag,
            intermediate_n,
            second_scale_n,
            intermediate_q,
            interleaving_ok: q_s < n_s && (n_s as f64) < q_next as f64,
            divisibility_conflict,
        });
    }

    Ok(MultiscaleSchedule {
        kappa,
        levels,
        constants: *constants,
        truncated,
    })
}

/// |L_{Nm} + ((m−2)/m)·L_N − 2·((m−1)/m)·L_{2N}|; annihilates scale laws
/// affine in 1/N exactly.
pub fn lemma6_combination(l_n: f64, l_2n: f64, l_nm: f64, m: u64) -> f64 {
    let mf = m as f64;
    (l_nm + (mf - 2.0) / mf * l_n - 2.0 * (mf - 1.0) / mf * l_2n).abs()
}

/// |L_{N'} + L_N − 2L_{2N}|; on an affine law this leaves exactly the
/// b/N' term of the law.
pub fn doubling_combination(l_n: f64, l_2n: f64, l_nprime: f64) -> f64 {
    (l_nprime + l_n - 2.0 * l_2n).abs()
}

/// |L + L_{N₀} − 2L_{2N₀}| with L the infinite-scale value; annihilates
/// affine laws exactly.
pub fn extrapolation_combination(l_limit: f64, l_n0: f64, l_2n0: f64) -> f64 {
    (l_limit + l_n0 - 2.0 * l_2n0).abs()
}

/// Three-scale residual from live evaluations: m ≥ 3 factors of N.
pub fn lemma6_residual(law: &impl ScaleFn, n: u64, m: u64) -> Result<f64> {
    if m < 3 {
        return Err(Error::InvalidParam(format!("m must be >= 3, got {m}")));
    }
    let l_n = law.l(n);
    let l_2n = law.l(2 * n);
    let l_nm = law.l(n * m);
    Ok(lemma6_combination(l_n, l_2n, l_nm, m))
}

/// Measures the step estimates between ladder levels s and s+1.
pub fn verify_step(
    law: &impl ScaleFn,
    schedule: &MultiscaleSchedule,
    s: usize,
    max_n: u64,
) -> Result<StepResiduals> {
    let level = schedule
        .levels
        .get(s)
        .ok_or_else(|| Error::InvalidParam(format!("level {s} not realized")))?;
    let next = schedule
        .levels
        .get(s + 1)
        .ok_or_else(|| Error::InvalidParam(format!("level {} not realized", s + 1)))?;
    let heaviest = next.n.max(next.second_scale_n.unwrap_or(0)).max(
        next.intermediate_n.map(|n| 2 * n).unwrap_or(0),
    );
    if heaviest.max(2 * next.n) > max_n {
        return Err(Error::BudgetExhausted {
            needed: heaviest.max(2 * next.n),
            budget: max_n,
        });
    }

    let kappa = schedule.kappa;
    let c = &schedule.constants;
    let l_ns = law.l(level.n);
    let l_2ns = law.l(2 * level.n);
    let l_next = law.l(next.n);

    let step47 = doubling_combination(l_ns, l_2ns, l_next);
    let step48 = (l_2ns - l_ns).abs();
    let step49 = (l_next - l_ns).abs();

    let m = next.n / level.n;
    let lemma6 = if m >= 3 && next.n % level.n == 0 {
        lemma6_combination(l_ns, l_2ns, l_next, m)
    } else {
        step47
    };

    // Lemma 7 pairs the ladder step in Case I, the second scale with the
    // top scale in Case II.
    let (lemma7, lemma8, ceiling_base) = match next.case_tag {
        CaseTag::CaseII => {
            let n_second = next.second_scale_n;
            let n_int = next.intermediate_n;
            let lemma7 = if let Some(ns2) = n_second {
                doubling_combination(law.l(ns2), law.l(2 * ns2), l_next)
            } else {
                step47
            };
            let lemma8 = match (n_int, n_second) {
                (Some(ni), Some(ns2)) if ns2 != ni => {
                    Some(doubling_combination(law.l(ni), law.l(2 * ni), law.l(ns2)))
                }
                _ => None,
            };
            (lemma7, lemma8, n_second.unwrap_or(level.n))
        }
        _ => (step47, None, level.n),
    };

    let q_s = level.q as f64;
    let q_prev = if s == 0 {
        0.0
    } else {
        schedule.levels[s - 1].q as f64
    };
    let ratio = next.n as f64 / ceiling_base as f64;
    let lemma7_ceiling_ok =
        ratio <= 1.0 || ratio.ln().ln() < 0.5 * c.c_prime * kappa * level.q as f64;

    Ok(StepResiduals {
        lemma6,
        lemma7,
        lemma8,
        step47,
        step48,
        step49,
        bound47: (-c.c1 * kappa * q_s).exp(),
        bound48: (-c.c2 * kappa * q_prev).exp(),
        bound49: (-c.c3 * kappa * q_prev).exp(),
        lemma7_ceiling_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diophantine::{continued_fraction, Omega};
    use crate::potential::PotentialSpec;

    fn affine(a: f64, b: f64) -> impl Fn(u64) -> f64 {
        move |n: u64| a + b / n as f64
    }

    #[test]
    fn lemma6_annihilates_affine_laws() {
        let law = affine(0.69, 3.7);
        for &(n, m) in &[(100u64, 3u64), (1000, 8), (64, 16)] {
            let r = lemma6_residual(&law, n, m).unwrap();
            assert!(r < 1e-12, "N = {n}, m = {m}: residual = {r}");
        }
    }

    #[test]
    fn lemma6_rejects_small_m() {
        assert!(lemma6_residual(&affine(1.0, 1.0), 100, 2).is_err());
    }

    #[test]
    fn doubling_combination_leaves_exact_tail() {
        // On an affine law the unweighted combination leaves exactly b/N'.
        let (a, b) = (0.5, 2.0);
        let law = affine(a, b);
        let r = doubling_combination(law.l(100), law.l(200), law.l(1600));
        assert!((r - b / 1600.0).abs() < 1e-14);
    }

    #[test]
    fn extrapolation_combination_annihilates_affine_laws() {
        let (a, b) = (0.7312, -4.2);
        let law = affine(a, b);
        let r = extrapolation_combination(a, law.l(500), law.l(1000));
        assert!(r < 1e-12);
    }

    #[test]
    fn golden_schedule_levels() {
        let cf = continued_fraction(&Omega::GoldenMean, 10_000).unwrap();
        let sched = build_schedule(&cf, 0.01, 100, 4, 100.0, &ScheduleConstants::default())
            .unwrap();
        // Base q0 = 89 (largest Fibonacci below N0 = 100); level 1 wants
        // ln q > 89, far past the stored list: truncated immediately.
        assert_eq!(sched.levels[0].q, 89);
        assert!(sched.truncated);
    }

    #[test]
    fn golden_schedule_from_small_base() {
        let cf = continued_fraction(&Omega::GoldenMean, 10_000).unwrap();
        let sched = build_schedule(&cf, 0.5, 6, 4, 100.0, &ScheduleConstants::default()).unwrap();
        // Base q0 = 5; level 1 needs ln q > 5, first Fibonacci above
        // e^5 ≈ 148.4 is 233. Level 2 would need ln q > 233: truncated.
        assert_eq!(sched.levels[0].q, 5);
        assert_eq!(sched.levels[1].q, 233);
        assert_eq!(sched.levels[1].case_tag, CaseTag::CaseI);
        assert!(sched.truncated);
        assert_eq!(sched.levels.len(), 2);
        // Divisibility (4.6).
        assert_eq!(sched.levels[1].n % sched.levels[0].n, 0);
        assert!(sched.levels[1].n >= 233);
    }

    #[test]
    fn rational_schedule_truncates() {
        let cf = continued_fraction(&Omega::Rational { p: 5, q: 8 }, 100).unwrap();
        let sched = build_schedule(&cf, 0.5, 4, 4, 100.0, &ScheduleConstants::default()).unwrap();
        assert!(sched.truncated);
        assert!(sched.levels.last().unwrap().q <= 8);
    }

    #[test]
    fn liouville_like_quotients_force_case_ii() {
        // A huge second quotient makes q jump past e^{10·q_s} in one step.
        let omega = Omega::Periodic {
            prefix: vec![1, 100_000],
            period: vec![1],
        };
        let cf = continued_fraction(&omega, u64::MAX).unwrap();
        let sched = build_schedule(&cf, 0.5, 1, 2, 1e6, &ScheduleConstants::default()).unwrap();
        let level1 = &sched.levels[1];
        // Base q0 = 1 (threshold ln q > 1): first q with ln q > 1 must be
        // tagged by ln q vs 10·q0 = 10.
        assert!(
            (level1.q as f64).ln() >= 1.0,
            "q1 = {}",
            level1.q
        );
        let has_case_ii = sched.levels.iter().any(|l| l.case_tag == CaseTag::CaseII);
        assert!(has_case_ii, "levels: {:?}", sched.levels);
    }

    #[test]
    fn verify_step_affine_law_residuals() {
        let cf = continued_fraction(&Omega::GoldenMean, 10_000).unwrap();
        let sched = build_schedule(&cf, 0.5, 6, 4, 100.0, &ScheduleConstants::default()).unwrap();
        let (a, b) = (0.7, 1.3);
        let law = affine(a, b);
        let res = verify_step(&law, &sched, 0, u64::MAX).unwrap();
        // The weighted combination cancels exactly; the unweighted ones
        // leave the known b/N' tail.
        assert!(res.lemma6 < 1e-12, "lemma6 = {}", res.lemma6);
        let n_next = sched.levels[1].n;
        assert!((res.step47 - b / n_next as f64).abs() < 1e-12);
    }

    #[test]
    fn base_scale_rejects_bad_kappa() {
        let law = affine(1.0, 1.0);
        let c = ScheduleConstants::default();
        assert!(choose_base_scale(&law, 0.5, 55, &c, 1 << 40).is_err());
    }

    #[test]
    fn base_scale_finds_window_for_positive_exponent() {
        // Affine law with L = 0.7: the ratio test passes immediately.
        let law = affine(0.7, 5.0);
        let c = ScheduleConstants::default();
        match choose_base_scale(&law, 0.005, 55, &c, 1 << 40).unwrap() {
            BaseScale::Found { n0, .. } => {
                let lower = c.kappa_sq_c * 0.005f64.powi(-2) * 55.0;
                assert!((n0 as f64) > lower);
            }
            other => panic!("expected Found, got {other:?}"),
        }
    }

    #[test]
    fn base_scale_fails_for_zero_exponent() {
        // v = 0, E = 0 is a quarter rotation: L_N = 0 at multiples of 4 and
        // tiny elsewhere; the scan must not report a positive window.
        let ev = GridEvaluator::new(PotentialSpec::zero(), 0.3, 0.0, 64).unwrap();
        let c = ScheduleConstants::default();
        let out = choose_base_scale(&ev, 0.005, 5, &c, 1 << 22);
        match out {
            Ok(BaseScale::NotFound { .. }) | Err(Error::BudgetExhausted { .. }) => {}
            other => panic!("expected failure, got {other:?}"),
        }
    }
}
