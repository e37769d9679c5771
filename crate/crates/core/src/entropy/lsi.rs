//! Interpolated equilibrium and the constants `B1`, `B2` of the weighted
//! log-Sobolev criterion.
//!
//! With `r = 1 - p_0` and `pbar_n = p_0 r^n`, the interpolated equilibrium is
//! `q_n = p*_n` for `n <= N` and `q_n = pbar_n / n` beyond. The criterion
//! compares the weights `mu_n = q_n / qbar` and `nu_n = pbar_{n+1}` through
//! `Psi(x) = |x| log(1 + |x|)`.

use serde::Serialize;

use crate::dist::geometric_equilibrium;
use crate::error::{Error, Result};

/// `|x| log(1 + |x|)`.
pub fn psi(x: f64) -> f64 {
    let a = x.abs();
    a * a.ln_1p()
}

/// Inverse of [`psi`] on `[0, inf)`, by bisection.
pub fn psi_inverse(y: f64) -> f64 {
    assert!(y >= 0.0, "psi_inverse needs y >= 0, got {y}");
    if y == 0.0 || y.is_infinite() {
        return y;
    }
    let mut hi = 1.0;
    while psi(hi) < y {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if psi(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Smallest `k` with `sum_{n<=k} w_n >= 1/2` for normalized weights `w`.
pub fn median_index(w: &[f64]) -> usize {
    let mut acc = 0.0;
    for (k, v) in w.iter().enumerate() {
        acc += v;
        if acc >= 0.5 {
            return k;
        }
    }
    w.len().saturating_sub(1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterpolationReport {
    pub q_seq: Vec<f64>,
    pub bar_q: f64,
    pub m: f64,
    pub h_int: f64,
    pub b1: f64,
    pub b2: f64,
    pub n_trunc: usize,
    /// Split index `m0` separating the `B2` and `B1` ranges.
    pub split: usize,
    /// The `k` attaining `B1`.
    pub b1_argmax: usize,
    /// Last level used: `n_max`, or the end of the positive prefix of `p`.
    pub active_n_max: usize,
    /// `sum_{n > active_n_max} q_n`, evaluated in closed form.
    pub tail_mass: f64,
    /// `B1` is attained outside the last decile of the truncated range, so the
    /// unexplored `k > n_max` cannot be the maximizer of a unimodal profile.
    pub tail_certified: bool,
}

/// Interpolated equilibrium with the median split.
pub fn interpolated_equilibrium(p: &[f64], mu: u32, n_trunc: usize) -> Result<InterpolationReport> {
    interpolated_equilibrium_split(p, mu, n_trunc, None)
}

/// `sum_{n > start} r^n / n` for `0 < r < 1`.
fn log_series_tail(r: f64, start: usize) -> f64 {
    let mut total = 0.0;
    let mut n = start + 1;
    let mut term = r.powi(n as i32);
    while term > 0.0 {
        let add = term / n as f64;
        total += add;
        if add <= total * 1e-17 {
            break;
        }
        n += 1;
        term *= r;
    }
    total
}

/// Last index of the positive prefix of `p`. Trailing exact zeros are the
/// front of a finite-speed integrator and are cut off; a zero followed by
/// positive mass is an error.
pub fn active_range(p: &[f64]) -> Result<usize> {
    let last = p.iter().rposition(|&v| v > 0.0).unwrap_or(0);
    match p[..=last].iter().position(|&v| !(v > 0.0)) {
        Some(index) => Err(Error::PositivityRequired { index }),
        None => Ok(last),
    }
}

/// As [`interpolated_equilibrium`] with an explicit split index `m0`.
pub fn interpolated_equilibrium_split(
    p: &[f64],
    mu: u32,
    n_trunc: usize,
    split: Option<usize>,
) -> Result<InterpolationReport> {
    let full_n_max = p.len().saturating_sub(1);
    if n_trunc == 0 || n_trunc >= full_n_max {
        return Err(Error::InvalidParams(format!(
            "need 1 <= N_trunc < n_max, got N_trunc={n_trunc}, n_max={full_n_max}"
        )));
    }
    let pstar = geometric_equilibrium(mu, full_n_max)?;
    let n_max = active_range(p)?;
    if n_trunc >= n_max {
        return Err(Error::InvalidParams(format!(
            "N_trunc={n_trunc} reaches the numerical front at {n_max}"
        )));
    }
    let p = &p[..=n_max];
    let p0 = p[0];
    let r_bar = 1.0 - p0;
    let pbar = |n: usize| p0 * r_bar.powi(n as i32);

    let q_seq: Vec<f64> = (0..=n_max)
        .map(|n| {
            if n <= n_trunc {
                pstar[n]
            } else {
                pbar(n) / n as f64
            }
        })
        .collect();
    let bar_q: f64 = q_seq.iter().sum();
    let tail_mass = if r_bar > 0.0 {
        p0 * log_series_tail(r_bar, n_max)
    } else {
        0.0
    };
    let weights: Vec<f64> = q_seq.iter().map(|q| q / bar_q).collect();
    let ratio: Vec<f64> = p.iter().zip(pstar.iter()).map(|(a, b)| a / b).collect();
    let m: f64 = weights.iter().zip(&ratio).map(|(w, x)| w * x).sum();
    let h_int: f64 = weights
        .iter()
        .zip(&ratio)
        .map(|(w, x)| w * x * (x / m).ln())
        .sum();

    let inv_nu: Vec<f64> = (0..=n_max)
        .map(|n| {
            let nu = pbar(n + 1);
            if nu > 0.0 {
                Ok(1.0 / nu)
            } else {
                Err(Error::DegenerateWeights { index: n })
            }
        })
        .collect::<Result<_>>()?;

    let split = split.unwrap_or_else(|| median_index(&weights));
    if split > n_max {
        return Err(Error::InvalidParams(format!(
            "split index {split} beyond n_max={n_max}"
        )));
    }

    // Upper tails of mu, including the closed-form part beyond n_max.
    let mut upper = vec![0.0; n_max + 1];
    let mut acc = tail_mass / bar_q;
    for k in (0..=n_max).rev() {
        upper[k] = acc;
        acc += weights[k];
    }
    let mut cum_inv_nu = 0.0;
    let mut b1 = 0.0;
    let mut b1_argmax = split;
    for k in 0..=n_max {
        cum_inv_nu += inv_nu[k];
        if k < split || upper[k] <= 0.0 {
            continue;
        }
        let value = cum_inv_nu / psi_inverse(1.0 / upper[k]);
        if value > b1 {
            b1 = value;
            b1_argmax = k;
        }
    }

    let lower_nu: f64 = inv_nu[..split].iter().sum();
    let lower_mu: f64 = weights[..split].iter().sum();
    let b2 = if split == 0 || lower_mu <= 0.0 {
        0.0
    } else {
        lower_nu / psi_inverse(1.0 / lower_mu)
    };

    Ok(InterpolationReport {
        q_seq,
        bar_q,
        m,
        h_int,
        b1,
        b2,
        n_trunc,
        split,
        b1_argmax,
        active_n_max: n_max,
        tail_mass,
        tail_certified: b1_argmax < n_max - n_max / 10,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn psi_values() {
        assert_eq!(psi(0.0), 0.0);
        assert_relative_eq!(psi(1.0), 2f64.ln());
        assert_relative_eq!(psi(-1.0), 2f64.ln());
        assert_relative_eq!(psi_inverse(2f64.ln()), 1.0, epsilon = 1e-15);
        assert_eq!(psi_inverse(f64::INFINITY), f64::INFINITY);
    }

    #[test]
    fn median_of_weights() {
        assert_eq!(median_index(&[0.2, 0.2, 0.2, 0.4]), 2);
        assert_eq!(median_index(&[0.5, 0.5]), 0);
        assert_eq!(median_index(&[0.1, 0.3, 0.6]), 2);
    }

    #[test]
    fn equilibrium_input_is_neutral() {
        let p = geometric_equilibrium(10, 500).unwrap();
        for n_trunc in [1, 20, 250, 499] {
            let rep = interpolated_equilibrium(&p, 10, n_trunc).unwrap();
            assert_relative_eq!(rep.m, 1.0, epsilon = 1e-12);
            assert!(rep.h_int.abs() <= 1e-12, "{}", rep.h_int);
            assert_relative_eq!(rep.bar_q, rep.q_seq.iter().sum::<f64>());
            assert!(rep.b1.is_finite() && rep.b1 > 0.0);
            assert!(rep.b2.is_finite() && rep.b2 >= 0.0);
            // The profile keeps rising while q is still geometric.
            assert_eq!(rep.tail_certified, n_trunc < 400, "{n_trunc}");
        }
    }

    #[test]
    fn interpolation_shape() {
        let p = geometric_equilibrium(3, 200).unwrap();
        let rep = interpolated_equilibrium(&p, 3, 5).unwrap();
        assert_eq!(rep.q_seq[5], p[5]);
        let r: f64 = 0.75;
        assert_relative_eq!(rep.q_seq[6], p[0] * r.powi(6) / 6.0, max_relative = 1e-12);
    }

    #[test]
    fn errors() {
        let mut p = geometric_equilibrium(3, 200).unwrap().into_inner();
        assert!(matches!(
            interpolated_equilibrium(&p, 3, 0),
            Err(Error::InvalidParams(_))
        ));
        assert!(matches!(
            interpolated_equilibrium(&p, 3, 200),
            Err(Error::InvalidParams(_))
        ));
        p[17] = 0.0;
        assert!(matches!(
            interpolated_equilibrium(&p, 3, 5),
            Err(Error::PositivityRequired { index: 17 })
        ));
        assert!(matches!(
            interpolated_equilibrium(&[1.0, 0.0, 0.0], 0, 1),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn trailing_zeros_are_cut() {
        let mut p = geometric_equilibrium(3, 200).unwrap().into_inner();
        p[150..].iter_mut().for_each(|v| *v = 0.0);
        assert_eq!(active_range(&p).unwrap(), 149);
        let rep = interpolated_equilibrium(&p, 3, 10).unwrap();
        assert_eq!(rep.active_n_max, 149);
        assert_eq!(rep.q_seq.len(), 150);
    }

    #[test]
    fn explicit_split() {
        let p = geometric_equilibrium(10, 500).unwrap();
        let rep = interpolated_equilibrium_split(&p, 10, 30, Some(0)).unwrap();
        assert_eq!(rep.b2, 0.0);
        assert_eq!(rep.split, 0);
    }

    proptest! {
        #[test]
        fn psi_inverse_round_trip(x in 1e-6f64..1e6) {
            let back = psi_inverse(psi(x));
            prop_assert!((back - x).abs() <= 1e-12 * x.max(1.0));
        }

        #[test]
        fn psi_monotone(a in 0.0f64..1e3, b in 0.0f64..1e3) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(psi(lo) <= psi(hi));
        }
    }
}
