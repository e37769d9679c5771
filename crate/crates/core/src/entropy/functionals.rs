//! Entropy, relative entropy and dissipation functionals on truncated laws.
//!
//! All logarithms are natural. Vectors of different length are compared on
//! the union of their index ranges with missing entries read as zero.

use serde::Serialize;

use crate::dist::ProbabilityVector;
use crate::error::{Error, Result};

/// Mismatched dissipation terms whose positive side carries at most this much
/// mass are treated as the numerical front of a finite-speed scheme rather
/// than a genuine support mismatch. See [`DissipationReport::effective`].
pub const FRONT_MASS_TOLERANCE: f64 = 1e-30;

fn at(p: &[f64], n: usize) -> f64 {
    p.get(n).copied().unwrap_or(0.0)
}

/// `H[p] = sum_n p_n log p_n` with `0 log 0 = 0`.
pub fn entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum()
}

/// `sum_n a_n log(a_n / b_n)`; `+inf` when `a_n > 0 = b_n` for some `n`.
pub fn kl_divergence(a: &[f64], b: &[f64]) -> f64 {
    let mut total = 0.0;
    for (n, &an) in a.iter().enumerate() {
        if an <= 0.0 {
            continue;
        }
        let bn = at(b, n);
        if bn <= 0.0 {
            return f64::INFINITY;
        }
        total += an * (an / bn).ln();
    }
    total.max(0.0)
}

/// The shifted law `p~_0 = p_0`, `p~_n = r p_{n-1}` with `r = 1 - p_0`,
/// truncated to the index range of `p`.
pub fn tilde_of(p: &[f64]) -> ProbabilityVector {
    let r_bar = 1.0 - at(p, 0);
    let mut out = Vec::with_capacity(p.len());
    out.push(at(p, 0));
    out.extend(p.iter().take(p.len().saturating_sub(1)).map(|v| r_bar * v));
    ProbabilityVector::from_raw(out)
}

/// Value and bookkeeping of the dissipation series
/// `sum_{n>=0} (p~_{n+1} - p_{n+1}) (log p~_{n+1} - log p_{n+1})`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DissipationReport {
    /// The series value; `+inf` as soon as one pair has exactly one zero side.
    pub value: f64,
    /// Sum over the pairs where both sides are positive.
    pub finite_part: f64,
    /// Sum of the positive side over mismatched pairs.
    pub mismatch_weight: f64,
    pub finite: bool,
    pub per_term: Option<Vec<f64>>,
}

impl DissipationReport {
    /// The dissipation with mismatches attached to at most
    /// [`FRONT_MASS_TOLERANCE`] mass ignored.
    ///
    /// A fixed-step integrator started from a point mass only reaches a
    /// bounded number of levels, and far tail entries underflow to zero; the
    /// exact flow is positive everywhere for `t > 0`. The ignored terms are
    /// bounded by their weight times a logarithm of the float range.
    pub fn effective(&self) -> f64 {
        if self.finite || self.mismatch_weight <= FRONT_MASS_TOLERANCE {
            self.finite_part
        } else {
            f64::INFINITY
        }
    }
}

fn dissipation_impl(p: &[f64], keep_terms: bool) -> DissipationReport {
    let r_bar = 1.0 - at(p, 0);
    let mut finite_part = 0.0;
    let mut mismatch_weight = 0.0;
    let mut terms = keep_terms.then(|| Vec::with_capacity(p.len().saturating_sub(1)));
    for n in 0..p.len().saturating_sub(1) {
        let tilde = r_bar * p[n];
        let actual = p[n + 1];
        let term = match (tilde > 0.0, actual > 0.0) {
            (true, true) => (tilde - actual) * (tilde.ln() - actual.ln()),
            (false, false) => 0.0,
            _ => {
                mismatch_weight += tilde.max(actual);
                f64::INFINITY
            }
        };
        if term.is_finite() {
            finite_part += term;
        }
        if let Some(t) = terms.as_mut() {
            t.push(term);
        }
    }
    let finite = mismatch_weight == 0.0;
    DissipationReport {
        value: if finite { finite_part } else { f64::INFINITY },
        finite_part,
        mismatch_weight,
        finite,
        per_term: terms,
    }
}

/// Entropy dissipation of `p`.
pub fn dissipation(p: &[f64]) -> DissipationReport {
    dissipation_impl(p, false)
}

/// As [`dissipation`], retaining every term of the series.
pub fn dissipation_terms(p: &[f64]) -> DissipationReport {
    dissipation_impl(p, true)
}

/// `log x` clipped to `[-2, 2]`.
pub fn truncated_log(x: f64) -> Result<f64> {
    if x.is_nan() || x <= 0.0 {
        return Err(Error::Domain(x));
    }
    Ok(clipped_log(x))
}

/// Total version of [`truncated_log`] on `[0, +inf]`.
fn clipped_log(x: f64) -> f64 {
    if x == 0.0 {
        -2.0
    } else {
        x.ln().clamp(-2.0, 2.0)
    }
}

/// `sum_n (r a_n - a_{n+1}) L(r a_n / a_{n+1})` where `a_n = p_n + shift` on
/// occupied levels (`p_n > 0`) and `0` elsewhere, and `r = 1 - p_0` from the
/// unshifted input. Pairs within the index range of `p` only; pairs with both
/// arguments zero contribute nothing.
pub fn modified_dissipation(p: &[f64], shift: f64) -> f64 {
    assert!(
        shift >= 0.0 && shift.is_finite(),
        "shift must be non-negative"
    );
    let r_bar = 1.0 - at(p, 0);
    let lifted = |v: f64| if v > 0.0 { v + shift } else { 0.0 };
    let mut total = 0.0;
    for n in 0..p.len().saturating_sub(1) {
        let x = r_bar * lifted(p[n]);
        let y = lifted(p[n + 1]);
        if x == 0.0 && y == 0.0 {
            continue;
        }
        let log_ratio = if y == 0.0 { 2.0 } else { clipped_log(x / y) };
        total += (x - y) * log_ratio;
    }
    total.max(0.0)
}

/// Exponential moment `sum_n K^n p_n` with a tail diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpMoment {
    /// May be `+inf` if the moment overflows.
    pub value: f64,
    pub log_value: f64,
    /// The last decile of indices carries more than 1% of the value.
    pub tail_dominated: bool,
}

pub fn exp_moment(p: &[f64], k: f64) -> ExpMoment {
    assert!(k > 0.0, "K must be positive");
    let ln_k = k.ln();
    let log_terms: Vec<(usize, f64)> = p
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(n, &v)| (n, v.ln() + n as f64 * ln_k))
        .collect();
    if log_terms.is_empty() {
        return ExpMoment {
            value: 0.0,
            log_value: f64::NEG_INFINITY,
            tail_dominated: false,
        };
    }
    let tail_start = p.len() - p.len().div_ceil(10);
    let max_log = log_terms
        .iter()
        .map(|&(_, l)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    let (value, log_value, tail_share) = if max_log < 1e300f64.ln() {
        let total: f64 = log_terms.iter().map(|&(_, l)| l.exp()).sum();
        let tail: f64 = log_terms
            .iter()
            .filter(|&&(n, _)| n >= tail_start)
            .map(|&(_, l)| l.exp())
            .sum();
        (total, total.ln(), tail / total)
    } else {
        let scaled: f64 = log_terms.iter().map(|&(_, l)| (l - max_log).exp()).sum();
        let tail: f64 = log_terms
            .iter()
            .filter(|&&(n, _)| n >= tail_start)
            .map(|&(_, l)| (l - max_log).exp())
            .sum();
        let log_value = max_log + scaled.ln();
        (log_value.exp(), log_value, tail / scaled)
    };
    ExpMoment {
        value,
        log_value,
        tail_dominated: tail_share > 0.01,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::geometric_equilibrium;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// `p_0 = 2/3`, `p_n = (1/3)(1/2)^n`, truncated far enough out that the
    /// dropped tail is below double precision.
    fn half_tail() -> ProbabilityVector {
        let mut v = vec![2.0 / 3.0];
        v.extend((1..=200).map(|n| (1.0 / 3.0) * 0.5f64.powi(n)));
        ProbabilityVector::new(v).unwrap()
    }

    #[test]
    fn entropy_values() {
        assert_eq!(entropy(&ProbabilityVector::dirac(0, 3).unwrap()), 0.0);
        assert_relative_eq!(entropy(&[0.5, 0.5]), -(2f64.ln()), epsilon = 1e-15);
        let p = geometric_equilibrium(10, 500).unwrap();
        // log(1/11) + 10 log(10/11)
        assert_relative_eq!(entropy(&p), -3.350_997_070_841_619_1, max_relative = 1e-14);
    }

    #[test]
    fn kl_values() {
        let p = geometric_equilibrium(10, 500).unwrap();
        assert_eq!(kl_divergence(&p, &p), 0.0);
        let d0 = ProbabilityVector::dirac(0, 500).unwrap();
        assert_relative_eq!(kl_divergence(&d0, &p), 11f64.ln(), epsilon = 1e-14);
        let d1 = ProbabilityVector::dirac(1, 5).unwrap();
        let d0 = ProbabilityVector::dirac(0, 5).unwrap();
        assert_eq!(kl_divergence(&d1, &d0), f64::INFINITY);
    }

    #[test]
    fn tilde_examples() {
        let p = geometric_equilibrium(4, 200).unwrap();
        let t = tilde_of(&p);
        for n in 0..200 {
            assert_relative_eq!(t[n], p[n], max_relative = 1e-12);
        }
        let t = tilde_of(&half_tail());
        assert_relative_eq!(t[0], 2.0 / 3.0);
        assert_relative_eq!(t[1], 2.0 / 9.0, epsilon = 1e-16);
        assert_relative_eq!(t[2], 1.0 / 18.0, epsilon = 1e-16);
        assert_relative_eq!(t[3], 1.0 / 36.0, epsilon = 1e-16);
        let d0 = ProbabilityVector::dirac(0, 4).unwrap();
        assert_eq!(tilde_of(&d0), d0);
    }

    #[test]
    fn dissipation_examples() {
        let p = geometric_equilibrium(10, 500).unwrap();
        assert!(dissipation(&p).value < 1e-25);

        let d = dissipation_terms(&half_tail());
        assert_relative_eq!(d.value, 2f64.ln() / 18.0, epsilon = 1e-12);
        let terms = d.per_term.unwrap();
        assert_relative_eq!(terms[0], (4.0f64 / 3.0).ln() / 18.0, epsilon = 1e-15);
        assert_relative_eq!(terms.iter().sum::<f64>(), d.value, epsilon = 1e-15);

        let d = dissipation(&[0.5, 0.5, 0.0, 0.0]);
        assert_eq!(d.value, f64::INFINITY);
        assert!(!d.finite);
        assert_eq!(d.mismatch_weight, 0.25);
        assert_eq!(d.effective(), f64::INFINITY);
    }

    #[test]
    fn front_mismatch_is_ignored_by_effective() {
        let mut v = vec![0.5, 0.5 - 1e-40, 1e-40, 0.0];
        let d = dissipation(&v);
        assert_eq!(d.value, f64::INFINITY);
        assert_eq!(d.effective(), d.finite_part);
        v[3] = 0.0;
        v[2] = 1e-3;
        v[1] = 0.5 - 1e-3;
        assert_eq!(dissipation(&v).effective(), f64::INFINITY);
    }

    #[test]
    fn truncated_log_values() {
        assert_eq!(truncated_log(1.0).unwrap(), 0.0);
        assert_eq!(truncated_log(3f64.exp()).unwrap(), 2.0);
        assert_eq!(truncated_log(0.1).unwrap(), -2.0);
        assert_relative_eq!(truncated_log(2.0).unwrap(), 2f64.ln());
        assert!(truncated_log(0.0).is_err());
        assert!(truncated_log(-1.0).is_err());
    }

    #[test]
    fn modified_dissipation_examples() {
        let p = geometric_equilibrium(10, 500).unwrap();
        assert!(modified_dissipation(&p, 0.0) < 1e-25);
        let p = half_tail();
        let md = modified_dissipation(&p, 0.0);
        // All log-ratios lie in [-2, 2]: equal to the full dissipation.
        assert_relative_eq!(md, 2f64.ln() / 18.0, epsilon = 1e-12);

        // r = 1/2, r*p_0/p_1 = e^3: that single term uses 2 instead of 3.
        let e3 = 3f64.exp();
        let p1 = 0.25 / e3;
        let p = [0.5, p1, 0.5 - p1];
        let x1 = 0.5 * p1;
        let y1 = 0.5 - p1;
        let expected = (0.25 - p1) * 2.0 + (x1 - y1) * (x1 / y1).ln().clamp(-2.0, 2.0);
        assert_relative_eq!(modified_dissipation(&p, 0.0), expected, epsilon = 1e-15);
    }

    #[test]
    fn modified_dissipation_shift_touches_only_occupied_levels() {
        let q = [0.5, 0.0, 0.5, 0.0, 0.0];
        // a = (0.6, 0, 0.6, 0, 0), r = 0.5
        let expected = 0.3 * 2.0 + 0.6 * 2.0 + 0.3 * 2.0;
        assert_relative_eq!(modified_dissipation(&q, 0.1), expected, epsilon = 1e-15);
    }

    #[test]
    fn exp_moment_values() {
        let p = geometric_equilibrium(10, 1000).unwrap();
        let m = exp_moment(&p, 1.05);
        assert_relative_eq!(m.value, 2.0, epsilon = 1e-12);
        assert!(!m.tail_dominated);
        // At the default truncation the geometric series is cut at 501 terms.
        let p = geometric_equilibrium(10, 500).unwrap();
        assert_relative_eq!(
            exp_moment(&p, 1.05).value,
            1.999_999_999_848_945_5,
            epsilon = 1e-13
        );
        for k in [1.01, 2.0, 7.5] {
            assert_eq!(
                exp_moment(&ProbabilityVector::dirac(0, 9).unwrap(), k).value,
                1.0
            );
        }
        let d10 = ProbabilityVector::dirac(10, 500).unwrap();
        assert_relative_eq!(
            exp_moment(&d10, 1.05).value,
            1.628_894_626_777_441_4,
            max_relative = 1e-14
        );
    }

    #[test]
    fn exp_moment_overflow_and_tail() {
        let p = ProbabilityVector::dirac(500, 500).unwrap();
        let m = exp_moment(&p, 1e3);
        assert_eq!(m.value, f64::INFINITY);
        assert_relative_eq!(m.log_value, 500.0 * 1e3f64.ln(), max_relative = 1e-14);
        assert!(m.tail_dominated);
    }

    fn arb_law() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(1e-6f64..1.0, 2..30).prop_map(|w| {
            let s: f64 = w.iter().sum();
            w.into_iter().map(|v| v / s).collect()
        })
    }

    proptest! {
        #[test]
        fn dissipation_is_symmetric_kl(p in arb_law()) {
            let t = tilde_of(&p);
            let d = dissipation(&p).value;
            // Unclamped sums: p~ loses mass through the truncation.
            let raw = |a: &[f64], b: &[f64]| -> f64 {
                a.iter().zip(b).map(|(x, y)| x * (x / y).ln()).sum()
            };
            let sym = raw(&p, &t) + raw(&t, &p);
            prop_assert!((d - sym).abs() <= 1e-10 * (1.0 + d));
        }

        #[test]
        fn truncated_log_is_monotone_and_bounded(x in 1e-6f64..1e6, y in 1e-6f64..1e6) {
            let (lx, ly) = (truncated_log(x).unwrap(), truncated_log(y).unwrap());
            prop_assert!(lx.abs() <= 2.0);
            if x <= y { prop_assert!(lx <= ly); }
            if (-2.0..=2.0).contains(&x.ln()) { prop_assert_eq!(lx, x.ln()); }
        }

        #[test]
        fn kl_nonnegative(a in arb_law(), b in arb_law()) {
            prop_assert!(kl_divergence(&a, &b) >= 0.0);
        }
    }
}
