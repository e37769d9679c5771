use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Least-squares fit of `H(t) ~ c1 exp(-c2 sqrt(t))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub c1: f64,
    pub c2: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub n_points: usize,
}

impl DecayFit {
    pub fn is_decay(&self) -> bool {
        self.c2 > 0.0
    }
}

/// `[t_final / 10, t_final]`.
pub fn default_window(t_final: f64) -> (f64, f64) {
    (t_final / 10.0, t_final)
}

/// Ordinary least squares of `log H` against `sqrt t` over the samples with
/// `t` in the closed window.
pub fn fit_sqrt_decay(series: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit> {
    let (t_min, t_max) = window;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(t, h) in series.iter().filter(|(t, _)| *t >= t_min && *t <= t_max) {
        if !(h > 0.0) {
            return Err(Error::NonPositiveEntropy { t, value: h });
        }
        xs.push(t.sqrt());
        ys.push(h.ln());
    }
    if xs.len() < 5 {
        return Err(Error::InsufficientData {
            needed: 5,
            found: xs.len(),
        });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData {
            needed: 2,
            found: 1,
        });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(DecayFit {
        c1: intercept.exp(),
        c2: -slope,
        r_squared,
        window,
        n_points: xs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample(f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
        (1..=100).map(|t| (t as f64, f(t as f64))).collect()
    }

    #[test]
    fn recovers_exact_model() {
        let fit = fit_sqrt_decay(&sample(|t| 2.0 * (-0.5 * t.sqrt()).exp()), (1.0, 100.0)).unwrap();
        assert_relative_eq!(fit.c1, 2.0, epsilon = 1e-10);
        assert_relative_eq!(fit.c2, 0.5, epsilon = 1e-10);
        assert_relative_eq!(fit.r_squared, 1.0, epsilon = 1e-10);
        assert_eq!(fit.n_points, 100);
        assert!(fit.is_decay());
    }

    #[test]
    fn detects_model_mismatch() {
        let fit = fit_sqrt_decay(&sample(|t| 3.0 / (t + 3.0)), (1.0, 100.0)).unwrap();
        // numpy.polyfit oracle on the same 100 points
        assert_relative_eq!(fit.r_squared, 0.970_342_302_589_444_9, epsilon = 1e-12);
        assert_relative_eq!(fit.c2, 0.323_501_45, epsilon = 1e-8);
        assert_relative_eq!(fit.c1.ln(), -0.487_419_75, epsilon = 1e-8);
    }

    #[test]
    fn rejects_bad_input() {
        let s = sample(|t| (-t).exp());
        assert!(matches!(
            fit_sqrt_decay(&s, (1.0, 4.0)),
            Err(Error::InsufficientData {
                needed: 5,
                found: 4
            })
        ));
        let mut s = sample(|t| 1.0 / t);
        s[10].1 = 0.0;
        assert!(matches!(
            fit_sqrt_decay(&s, (1.0, 100.0)),
            Err(Error::NonPositiveEntropy { .. })
        ));
        assert_eq!(default_window(2000.0), (200.0, 2000.0));
    }
}
