//! The generator of the chain acting on functions of the empirical measure.
//!
//! Rates are for `lambda = 1`: the histogram `q` jumps to
//! `q + (d_{l-1} + d_{m+1} - d_l - d_m) / N` at rate `N q_l (q_m - 1{l=m}/N)`
//! for every occupied `l >= 1` and `m >= 0`.

use crate::dist::EmpiricalMeasure;

/// `sum_{l >= 1, m >= 0} N q_l (q_m - 1{l=m}/N) (psi(q^{l,m}) - psi(q))`.
pub fn apply_generator(q: &EmpiricalMeasure, psi: impl Fn(&EmpiricalMeasure) -> f64) -> f64 {
    let n = q.n_agents() as f64;
    let base = psi(q);
    let mut total = 0.0;
    for (giver, c_giver) in q.iter().filter(|&(l, _)| l >= 1) {
        for (receiver, c_receiver) in q.iter() {
            let pairs = c_giver * (c_receiver - usize::from(giver == receiver));
            // giver == receiver + 1 swaps two agents between the same levels.
            if pairs == 0 || giver == receiver + 1 {
                continue;
            }
            let next = q.after_transfer(giver, receiver);
            total += pairs as f64 / n * (psi(&next) - base);
        }
    }
    total
}

/// Generator applied to `q -> phi(q_k)`, in the per-level form: jumps of
/// `q_k` by `+-1/N` and `+-2/N`, the latter written with second differences.
pub fn generator_phi_k(q: &EmpiricalMeasure, k: usize, phi: impl Fn(f64) -> f64) -> f64 {
    let n = q.n_agents() as f64;
    let inv = 1.0 / n;
    let at = |level: Option<usize>| level.map_or(0.0, |l| q.q(l));
    let r_bar = q.r_bar();
    let qk = q.q(k);
    let q_prev = at(k.checked_sub(1));
    let q_next = q.q(k + 1);
    let diff = |step: f64| phi(qk + step) - phi(qk);
    // Terms with a vanishing rate are skipped so phi is only evaluated at
    // reachable values.
    let term = |rate: f64, delta: &dyn Fn() -> f64| if rate == 0.0 { 0.0 } else { rate * delta() };

    if k == 0 {
        return term(n * q_next * (r_bar - inv), &|| diff(inv))
            + term(n * qk * (r_bar - q_next), &|| diff(-inv));
    }
    let self_prev = if k > 1 { inv } else { 0.0 };
    let up = n * (q_next * (1.0 - inv - qk) + q_prev * (r_bar - self_prev - qk));
    let down = n * qk * (1.0 + r_bar - 2.0 * inv - q_prev - q_next);
    let up2 = n * q_prev * q_next;
    let down2 = n * qk * (qk - inv);
    term(up, &|| diff(inv))
        + term(down, &|| diff(-inv))
        + term(up2, &|| diff(2.0 * inv) - 2.0 * diff(inv))
        + term(down2, &|| diff(-2.0 * inv) - 2.0 * diff(-inv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn mean(q: &EmpiricalMeasure) -> f64 {
        q.mean()
    }

    fn arb_dollars() -> impl Strategy<Value = Vec<u32>> {
        prop::collection::vec(0u32..7, 2..9)
    }

    #[test]
    fn constants_and_mean_are_killed() {
        let q = EmpiricalMeasure::from_dollars(&[0, 1, 3, 3, 5]);
        assert_eq!(apply_generator(&q, |_| 4.2), 0.0);
        assert!(apply_generator(&q, mean).abs() < 1e-12);
    }

    #[test]
    fn q0_hand_value() {
        // N = 3, dollars (1, 1, 1): every move makes one agent poor and the
        // receiver 2, so q_0 goes 0 -> 1/3 at total rate 3 * 2/3 = 2.
        let q = EmpiricalMeasure::from_dollars(&[1, 1, 1]);
        assert_relative_eq!(apply_generator(&q, |h| h.q(0)), 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn exponential_moment_expansion() {
        // A transfer l -> m changes sum K^n q_n by (K - 1)(K^m - K^{l-1}) / N.
        let k: f64 = 1.3;
        for dollars in [
            vec![0u32, 1, 2],
            vec![3, 0, 0],
            vec![1, 1, 1],
            vec![2, 1, 0],
        ] {
            let q = EmpiricalMeasure::from_dollars(&dollars);
            let n = 3.0;
            let psi = |h: &EmpiricalMeasure| {
                h.iter()
                    .map(|(l, c)| k.powi(l as i32) * c as f64 / n)
                    .sum::<f64>()
            };
            let mut expected = 0.0;
            for (l, cl) in q.iter().filter(|&(l, _)| l >= 1) {
                for (m, cm) in q.iter() {
                    let rate = cl as f64 * (cm as f64 - if l == m { 1.0 } else { 0.0 }) / n;
                    expected += rate * (k - 1.0) * (k.powi(m as i32) - k.powi(l as i32 - 1)) / n;
                }
            }
            assert_relative_eq!(apply_generator(&q, psi), expected, epsilon = 1e-13);
        }
    }

    #[test]
    fn phi_k_examples() {
        let q = EmpiricalMeasure::from_dollars(&[0, 0, 5, 5]);
        assert_eq!(generator_phi_k(&q, 8, |x| x * x + 1.0), 0.0);
        let q = EmpiricalMeasure::from_dollars(&[1, 1, 1]);
        let lhs = generator_phi_k(&q, 1, |x| x * x);
        let rhs = apply_generator(&q, |h| h.q(1).powi(2));
        assert_relative_eq!(lhs, rhs, epsilon = 1e-14);
    }

    proptest! {
        #[test]
        fn phi_k_agrees_with_generator(dollars in arb_dollars(), k in 0usize..9, a in -2.0f64..2.0) {
            let q = EmpiricalMeasure::from_dollars(&dollars);
            let phi = |x: f64| (a * x).exp() + x * x * x;
            let lhs = generator_phi_k(&q, k, phi);
            let rhs = apply_generator(&q, |h| phi(h.q(k)));
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()), "{lhs} vs {rhs}");
        }

        #[test]
        fn weighted_identity_sums_to_zero(dollars in arb_dollars()) {
            let q = EmpiricalMeasure::from_dollars(&dollars);
            let total: f64 = (0..=q.max_level() + 1)
                .map(|k| k as f64 * generator_phi_k(&q, k, |x| x))
                .sum();
            prop_assert!(total.abs() <= 1e-10);
            prop_assert!(apply_generator(&q, mean).abs() <= 1e-10);
        }
    }
}
