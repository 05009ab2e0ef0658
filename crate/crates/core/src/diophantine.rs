//! Continued fractions, convergents, and approximant selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Frequencies, with named quadratic irrationals kept exact so deep
/// convergents never depend on floating-point division.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Omega {
    /// (√5 − 1)/2, partial quotients all 1.
    GoldenMean,
    /// √2 − 1, partial quotients all 2.
    Sqrt2MinusOne,
    /// p/q in lowest terms, 0 ≤ p < q.
    Rational { p: u64, q: u64 },
    /// A decimal value in (0, 1) at working precision.
    Decimal { value: f64 },
    /// Eventually periodic partial quotients: `prefix` then `period` repeated.
    Periodic { prefix: Vec<u64>, period: Vec<u64> },
}

impl Omega {
    pub fn value(&self) -> f64 {
        match self {
            Omega::GoldenMean => (5.0f64.sqrt() - 1.0) / 2.0,
            Omega::Sqrt2MinusOne => 2.0f64.sqrt() - 1.0,
            Omega::Rational { p, q } => *p as f64 / *q as f64,
            Omega::Decimal { value } => *value,
            Omega::Periodic { prefix, period } => {
                // Evaluate a deep truncation of the expansion.
                let mut quotients: Vec<u64> = prefix.clone();
                while quotients.len() < 64 && !period.is_empty() {
                    quotients.extend_from_slice(period);
                }
                let mut val = 0.0f64;
                for &a in quotients.iter().rev() {
                    val = 1.0 / (a as f64 + val);
                }
                val
            }
        }
    }
}

/// Continued-fraction data of ω: partial quotients (leading 0 implicit)
/// and the convergents (p_s, q_s) with q_s ≤ max_q.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergentList {
    pub omega: f64,
    pub partial_quotients: Vec<u64>,
    /// (p_s, q_s) pairs, q_s strictly increasing.
    pub convergents: Vec<(u64, u64)>,
    /// True when the stored list stops before max_q: either the expansion
    /// is finite (rational ω) or precision ran out first.
    pub truncated: bool,
    /// True when a decimal input exhausted its floating-point precision
    /// budget before reaching max_q.
    pub precision_exhausted: bool,
}

/// Result of scanning the strong Diophantine condition
/// ‖kω‖ > C(|k|·log(1+|k|)^A)⁻¹ over 1 ≤ k ≤ k_max.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiophantineReport {
    pub satisfies: bool,
    pub worst_k: u64,
    /// min over k of ‖kω‖ / bound(k); > 1 iff the condition holds.
    pub margin: f64,
}

/// Outcome of an approximant lookup: exhaustion is a value, not an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApproximantQuery {
    Found { p: u64, q: u64 },
    Exhausted,
}

/// Quotients of a decimal become unreliable once q² approaches 1/ε; stop
/// conservatively rather than emit garbage.
const DECIMAL_Q_LIMIT: u64 = 20_000_000;

/// All convergents of ω with q_s ≤ max_q.
///
/// Named irrationals and explicit quotient lists generate quotients from
/// the known expansion; decimals run the Euclidean algorithm with a
/// precision budget and set `precision_exhausted` when it runs out.
pub fn continued_fraction(omega: &Omega, max_q: u64) -> Result<ConvergentList> {
    let value = omega.value();
    if !(0.0..1.0).contains(&value) || value == 0.0 {
        return Err(Error::InvalidParam(format!(
            "omega must lie in (0, 1), got {value}"
        )));
    }
    match omega {
        Omega::GoldenMean => Ok(from_quotient_iter(value, std::iter::repeat(1), max_q, false)),
        Omega::Sqrt2MinusOne => Ok(from_quotient_iter(value, std::iter::repeat(2), max_q, false)),
        Omega::Periodic { prefix, period } => {
            if prefix.iter().chain(period).any(|&a| a == 0) {
                return Err(Error::InvalidParam("partial quotients must be positive".into()));
            }
            if period.is_empty() && prefix.is_empty() {
                return Err(Error::InvalidParam("empty quotient list".into()));
            }
            let prefix = prefix.clone();
            let period = period.clone();
            if period.is_empty() {
                // Finite expansion behaves like a rational.
                let iter = prefix.clone().into_iter();
                Ok(from_quotient_iter(value, iter, max_q, false))
            } else {
                let iter = prefix.into_iter().chain(RepeatList::new(period));
                Ok(from_quotient_iter(value, iter, max_q, false))
            }
        }
        Omega::Rational { p, q } => {
            if *q == 0 || gcd(*p, *q) != 1 {
                return Err(Error::InvalidParam(format!(
                    "rational omega must be in lowest terms with q > 0, got {p}/{q}"
                )));
            }
            let quotients = euclid_quotients(*p, *q);
            Ok(from_quotient_iter(value, quotients.into_iter(), max_q, false))
        }
        Omega::Decimal { value: _ } => {
            let quotients = decimal_quotients(value);
            let mut cf = from_quotient_iter(value, quotients.into_iter(), max_q, false);
            // A decimal quotient list that runs out below max_q stopped on
            // the precision budget, not because the expansion ended.
            if !cf.truncated {
                if let Some(&(_, q_last)) = cf.convergents.last() {
                    if q_last < max_q {
                        cf.truncated = true;
                        cf.precision_exhausted = true;
                    }
                }
            }
            Ok(cf)
        }
    }
}

/// Infinite repetition of a quotient block.
struct RepeatList {
    block: Vec<u64>,
    i: usize,
}

impl RepeatList {
    fn new(block: Vec<u64>) -> Self {
        RepeatList { block, i: 0 }
    }
}

impl Iterator for RepeatList {
    type Item = u64;
    fn next(&mut self) -> Option<u64> {
        let a = self.block[self.i];
        self.i = (self.i + 1) % self.block.len();
        Some(a)
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Partial quotients of p/q (after the leading 0), via the Euclidean
/// algorithm in exact integer arithmetic.
fn euclid_quotients(p: u64, q: u64) -> Vec<u64> {
    let (mut num, mut den) = (q, p);
    let mut out = Vec::new();
    while den != 0 {
        out.push(num / den);
        let r = num % den;
        num = den;
        den = r;
    }
    out
}

/// Partial quotients of a decimal in (0,1), truncated on the precision budget.
fn decimal_quotients(omega: f64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut frac = omega;
    let mut q_prev: u64 = 0;
    let mut q_cur: u64 = 1;
    loop {
        if frac < 1e-12 {
            break;
        }
        let inv = 1.0 / frac;
        let a = inv.floor();
        if !a.is_finite() || a < 1.0 || a > 1e18 {
            break;
        }
        let a_int = a as u64;
        let q_next = match a_int
            .checked_mul(q_cur)
            .and_then(|x| x.checked_add(q_prev))
        {
            Some(q) => q,
            None => break,
        };
        if q_next > DECIMAL_Q_LIMIT {
            break;
        }
        out.push(a_int);
        q_prev = q_cur;
        q_cur = q_next;
        frac = inv - a;
    }
    out
}

/// Builds the convergent table from a quotient stream, dropping the
/// duplicate q that the 0/1 seed produces when a₁ = 1.
fn from_quotient_iter<I: Iterator<Item = u64>>(
    omega: f64,
    quotients: I,
    max_q: u64,
    precision_exhausted: bool,
) -> ConvergentList {
    let mut stored_quotients = Vec::new();
    let mut convergents: Vec<(u64, u64)> = vec![(0, 1)];
    // Seeds for the recurrence p_s = a_s p_{s-1} + p_{s-2}.
    let (mut p_prev, mut q_prev): (u64, u64) = (1, 0);
    let (mut p_cur, mut q_cur): (u64, u64) = (0, 1);
    // Set when the stored list stops while the expansion still continues.
    let mut truncated = false;
    for a in quotients {
        let pq_next = a
            .checked_mul(p_cur)
            .and_then(|x| x.checked_add(p_prev))
            .zip(a.checked_mul(q_cur).and_then(|x| x.checked_add(q_prev)));
        let (p_next, q_next) = match pq_next {
            Some(pq) => pq,
            None => {
                truncated = true;
                break;
            }
        };
        if q_next > max_q {
            truncated = true;
            break;
        }
        stored_quotients.push(a);
        if q_next == convergents.last().unwrap().1 {
            // 0/1 followed by 1/1: keep the better approximation.
            convergents.pop();
        }
        convergents.push((p_next, q_next));
        p_prev = p_cur;
        q_prev = q_cur;
        p_cur = p_next;
        q_cur = q_next;
    }
    ConvergentList {
        omega,
        partial_quotients: stored_quotients,
        convergents,
        truncated,
        precision_exhausted,
    }
}

/// Distance from x to the nearest integer.
pub fn dist_to_integers(x: f64) -> f64 {
    let f = x - x.floor();
    f.min(1.0 - f)
}

/// Checks ‖kω‖ > C·(|k|·log(1+|k|)^A)⁻¹ for all 1 ≤ k ≤ k_max.
pub fn strong_diophantine_check(
    omega: f64,
    constant: f64,
    power: f64,
    k_max: u64,
) -> DiophantineReport {
    let mut worst_k = 1;
    let mut margin = f64::INFINITY;
    for k in 1..=k_max {
        let kf = k as f64;
        let bound = constant / (kf * (1.0 + kf).ln().powf(power));
        let dist = dist_to_integers(kf * omega);
        let ratio = dist / bound;
        if ratio < margin {
            margin = ratio;
            worst_k = k;
        }
    }
    DiophantineReport {
        satisfies: margin > 1.0,
        worst_k,
        margin,
    }
}

/// Smallest stored convergent with log q_s strictly above `log_threshold`
/// (thresholds live in log scale because e^{q_s} overflows).
pub fn next_approximant_above(cf: &ConvergentList, log_threshold: f64) -> ApproximantQuery {
    for &(p, q) in &cf.convergents {
        if (q as f64).ln() > log_threshold {
            return ApproximantQuery::Found { p, q };
        }
    }
    ApproximantQuery::Exhausted
}
