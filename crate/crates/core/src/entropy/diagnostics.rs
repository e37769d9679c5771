use serde::{Deserialize, Serialize};

use super::functionals::{dissipation, exp_moment};
use super::lsi::{active_range, interpolated_equilibrium_split};
use crate::mean_field::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PillarRatio {
    /// `|r - r*|`.
    pub lhs: f64,
    pub sqrt_d: f64,
    pub ratio: f64,
}

/// `|r - r*| / sqrt(D)` with the exact dissipation of `p`.
pub fn pillar_ratio(p: &[f64], mu: u32) -> PillarRatio {
    let r_bar = 1.0 - p.first().copied().unwrap_or(0.0);
    pillar_from(r_bar, dissipation(p).value, mu)
}

/// Pillar ratio from precomputed `r` and `D`. `0/0` is reported as `0`.
pub fn pillar_from(r_bar: f64, d: f64, mu: u32) -> PillarRatio {
    let r_star = f64::from(mu) / (1.0 + f64::from(mu));
    let lhs = (r_bar - r_star).abs();
    let sqrt_d = d.sqrt();
    let ratio = if lhs == 0.0 {
        0.0
    } else if sqrt_d == 0.0 {
        f64::INFINITY
    } else {
        lhs / sqrt_d
    };
    PillarRatio { lhs, sqrt_d, ratio }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EedRatios {
    /// `H / (sqrt(D) |log(1/D)|)`.
    pub thm1_ratio: f64,
    /// `H / (D |log(1/D)|)`.
    pub thm2_ratio: f64,
}

/// Entropy / entropy-dissipation ratios; `|log(1/D)|` is floored at 1.
pub fn eed_ratios(h: f64, d: f64) -> EedRatios {
    if h == 0.0 {
        return EedRatios {
            thm1_ratio: 0.0,
            thm2_ratio: 0.0,
        };
    }
    if d == 0.0 {
        return EedRatios {
            thm1_ratio: f64::INFINITY,
            thm2_ratio: f64::INFINITY,
        };
    }
    let log_factor = d.ln().abs().max(1.0);
    EedRatios {
        thm1_ratio: h / (d.sqrt() * log_factor),
        thm2_ratio: h / (d * log_factor),
    }
}

/// First sample index from which `r*/r` and `r/r*` both stay at most
/// `(1 + k) / 2` for the rest of the trajectory.
pub fn detect_t_star(traj: &Trajectory, k: f64) -> Option<usize> {
    let r_star = f64::from(traj.mu) / (1.0 + f64::from(traj.mu));
    let bound = 0.5 * (1.0 + k);
    let ok = |r: f64| r > 0.0 && r_star / r <= bound && r / r_star <= bound;
    let mut onset = None;
    for (i, o) in traj.observables.iter().enumerate() {
        match (ok(o.r_bar), onset) {
            (true, None) => onset = Some(i),
            (false, _) => onset = None,
            _ => {}
        }
    }
    onset
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsConfig {
    /// Base of the exponential moment and of the `t*` ratio test.
    pub k: f64,
    /// Evaluate the interpolated equilibrium (needs stored snapshots).
    pub interpolation: bool,
    /// Split index for `B1`/`B2`; the median of `mu_n` when absent.
    pub split: Option<usize>,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            k: 1.05,
            interpolation: true,
            split: None,
        }
    }
}

/// One row of the diagnostic export. Quantities that are undefined at a
/// sample (for instance `B1` before the law is positive everywhere) are NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticRow {
    pub t: f64,
    pub h: f64,
    pub d: f64,
    pub pillar_ratio: f64,
    pub thm1_ratio: f64,
    pub thm2_ratio: f64,
    pub exp_moment: f64,
    pub b1: f64,
    pub b2: f64,
    pub h_int: f64,
}

/// `N = ceil(|log(1/D)|) * 5`, kept inside `[1, n_max)`.
fn truncation_level(d: f64, n_max: usize) -> usize {
    let n = (d.ln().abs().ceil() * 5.0) as usize;
    n.clamp(1, n_max.saturating_sub(1).max(1))
}

/// Diagnostic rows for every sample of `traj`.
pub fn diagnose(traj: &Trajectory, cfg: &DiagnosticsConfig) -> Vec<DiagnosticRow> {
    let have_laws = traj.snapshots.len() == traj.len();
    traj.times
        .iter()
        .zip(&traj.observables)
        .enumerate()
        .map(|(i, (&t, o))| {
            let eed = eed_ratios(o.h, o.d);
            let law = have_laws.then(|| traj.normalized_snapshot(i));
            let moment = law
                .as_ref()
                .map_or(f64::NAN, |p| exp_moment(p, cfg.k).value);
            let interp = law
                .as_ref()
                .filter(|_| cfg.interpolation && o.d.is_finite() && o.d > 0.0)
                .and_then(|p| {
                    let n = truncation_level(o.d, active_range(p).ok()?);
                    interpolated_equilibrium_split(p, traj.mu, n, cfg.split).ok()
                });
            DiagnosticRow {
                t,
                h: o.h,
                d: o.d,
                pillar_ratio: pillar_from(o.r_bar, o.d, traj.mu).ratio,
                thm1_ratio: eed.thm1_ratio,
                thm2_ratio: eed.thm2_ratio,
                exp_moment: moment,
                b1: interp.as_ref().map_or(f64::NAN, |r| r.b1),
                b2: interp.as_ref().map_or(f64::NAN, |r| r.b2),
                h_int: interp.as_ref().map_or(f64::NAN, |r| r.h_int),
            }
        })
        .collect()
}

/// Empirical suprema over a set of diagnostic rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticSummary {
    pub t_star: Option<f64>,
    pub pillar_sup: f64,
    /// Supremum of `thm2_ratio` over `t >= t*` (NaN without `t*`).
    pub thm2_sup: f64,
    pub thm1_sup: f64,
    pub exp_moment_sup: f64,
}

/// Suprema over the rows with `t` in `window`; `thm2_sup` also requires
/// `t >= t*`.
pub fn summarize(
    traj: &Trajectory,
    rows: &[DiagnosticRow],
    k: f64,
    window: (f64, f64),
) -> DiagnosticSummary {
    let t_star = detect_t_star(traj, k).map(|i| traj.times[i]);
    let in_window = |r: &&DiagnosticRow| r.t >= window.0 && r.t <= window.1;
    let sup = |f: &dyn Fn(&DiagnosticRow) -> f64, from: f64| {
        rows.iter()
            .filter(in_window)
            .filter(|r| r.t >= from)
            .map(f)
            .filter(|v| !v.is_nan())
            .fold(f64::NEG_INFINITY, f64::max)
    };
    DiagnosticSummary {
        t_star,
        pillar_sup: sup(&|r| r.pillar_ratio, f64::NEG_INFINITY),
        thm2_sup: t_star.map_or(f64::NAN, |ts| sup(&|r| r.thm2_ratio, ts)),
        thm1_sup: sup(&|r| r.thm1_ratio, f64::NEG_INFINITY),
        exp_moment_sup: sup(&|r| r.exp_moment, f64::NEG_INFINITY),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{geometric_equilibrium, ProbabilityVector};
    use crate::mean_field::{integrate_datum, InitialDatum, OdeConfig};

    #[test]
    fn pillar_examples() {
        let p = geometric_equilibrium(10, 500).unwrap();
        let pr = pillar_ratio(&p, 10);
        assert!(pr.lhs < 1e-15 && pr.sqrt_d < 1e-7);
        let d = ProbabilityVector::dirac(10, 500).unwrap();
        let pr = pillar_ratio(&d, 10);
        assert!((pr.lhs - 1.0 / 11.0).abs() < 1e-15);
        assert_eq!(pr.sqrt_d, f64::INFINITY);
        assert_eq!(pr.ratio, 0.0);
        assert_eq!(pillar_from(10.0 / 11.0, 0.0, 10).ratio, 0.0);
    }

    #[test]
    fn eed_examples() {
        assert_eq!(
            eed_ratios(0.0, 0.5),
            EedRatios {
                thm1_ratio: 0.0,
                thm2_ratio: 0.0
            }
        );
        let r = eed_ratios(1.0, 0.5);
        assert_eq!(r.thm2_ratio, 2.0);
        let r = eed_ratios(1.0, (-4.0f64).exp());
        assert!((r.thm2_ratio - 4.0f64.exp() / 4.0).abs() < 1e-12);
        assert_eq!(eed_ratios(1.0, 0.0).thm1_ratio, f64::INFINITY);
    }

    #[test]
    fn dirac_trajectory_diagnostics() {
        let cfg = OdeConfig::new(60.0, 500);
        let traj = integrate_datum(InitialDatum::Dirac { mu: 10 }, &cfg).unwrap();
        let rows = diagnose(&traj, &DiagnosticsConfig::default());
        assert_eq!(rows.len(), 61);
        let t_star = detect_t_star(&traj, 1.05).expect("onset within t <= 60");
        assert!(traj.times[t_star] > 0.0);
        for row in &rows[1..] {
            assert!(row.pillar_ratio.is_finite());
            assert!(row.exp_moment < 2.5);
        }
        let at50 = &rows[50];
        assert!(at50.b1.is_finite() && at50.b2.is_finite() && at50.h_int.is_finite());
    }
}
