//! Ensembles of the N-agent chain compared with the mean-field flow and with
//! the equilibrium.

use serde::{Deserialize, Serialize};

use crate::dist::{geometric_equilibrium, l1_distance_empirical, EmpiricalMeasure};
use crate::error::{Error, Result};
use crate::mean_field::{InitialDatum, Trajectory};
use crate::sim::{run_snapshots, AgentInit, EnsembleConfig, Summary};

/// Slack of the per-run Pinsker check `entropic >= l1^2 / 2`.
pub const PINSKER_SLACK: f64 = 1e-12;

/// `z` for a two-sided 95% interval.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosReport {
    pub times: Vec<f64>,
    /// `E ||q - p||_1^2`.
    pub l1_sq: Vec<Summary>,
    /// `E sum_n q_n log(q_n / p_n)`; runs with `q_n > 0 = p_n` are counted
    /// in `n_infinite` and left out of the mean.
    pub entropic: Vec<Summary>,
    pub n_agents: usize,
    pub mu: u32,
    pub runs: usize,
    pub base_seed: u64,
    /// Run/time pairs where `entropic < l1^2 / 2 - 1e-12`.
    pub pinsker_violations: usize,
}

/// `sum_{q_n > 0} q_n log(q_n / p_n)`, `+inf` if `p_n = 0` on the support.
pub fn empirical_relative_entropy(q: &EmpiricalMeasure, p: &[f64]) -> f64 {
    let n = q.n_agents() as f64;
    let mut total = 0.0;
    for (level, count) in q.iter() {
        let qn = count as f64 / n;
        match p.get(level) {
            Some(&pn) if pn > 0.0 => total += qn * (qn / pn).ln(),
            _ => return f64::INFINITY,
        }
    }
    total
}

/// `sum_n K^n q_n`, in log-sum-exp form when a term exceeds `1e300`.
pub fn empirical_exp_moment(q: &EmpiricalMeasure, k: f64) -> f64 {
    let n = q.n_agents() as f64;
    let logs: Vec<f64> = q
        .iter()
        .map(|(level, c)| (c as f64 / n).ln() + level as f64 * k.ln())
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max < 1e300f64.ln() {
        logs.iter().map(|l| l.exp()).sum()
    } else {
        (max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln()).exp()
    }
}

fn check_init(cfg: &EnsembleConfig, traj: &Trajectory) -> Result<()> {
    let mu = cfg.params.mu;
    let mismatch = |msg: String| Err(Error::InitMismatch(msg));
    match (&cfg.init, &traj.init) {
        (AgentInit::AllEqual, InitialDatum::Dirac { mu: m })
        | (AgentInit::SingleRich, InitialDatum::TwoPoint { mu: m })
            if *m == mu => {}
        (a, b) => return mismatch(format!("{a:?} cannot be paired with {b:?} at mu={mu}")),
    }
    if traj.mu != mu {
        return mismatch(format!("trajectory mu={} but ensemble mu={mu}", traj.mu));
    }
    Ok(())
}

/// Chaos metrics `E ||q(t) - p(t)||_1^2` and `E sum q log(q/p(t))`.
pub fn chaos_curves(cfg: &EnsembleConfig, traj: &Trajectory) -> Result<ChaosReport> {
    cfg.validate()?;
    check_init(cfg, traj)?;
    if traj.snapshots.len() != traj.len() {
        return Err(Error::InvalidParams(
            "trajectory was integrated without snapshots".into(),
        ));
    }
    let laws = cfg
        .snapshot_times
        .iter()
        .map(|&t| {
            traj.index_of(t)
                .map(|i| traj.normalized_snapshot(i))
                .ok_or(Error::TimeMismatch(t))
        })
        .collect::<Result<Vec<_>>>()?;
    let runs = run_snapshots(cfg)?;
    let mut l1_sq = Vec::with_capacity(laws.len());
    let mut entropic = Vec::with_capacity(laws.len());
    let mut pinsker_violations = 0;
    for (ti, p) in laws.iter().enumerate() {
        let mut l1s = Vec::with_capacity(runs.len());
        let mut ents = Vec::with_capacity(runs.len());
        for run in &runs {
            let q = &run[ti];
            let l1 = l1_distance_empirical(q, p);
            let ent = empirical_relative_entropy(q, p);
            if ent.is_finite() && ent < 0.5 * l1 * l1 - PINSKER_SLACK {
                pinsker_violations += 1;
            }
            l1s.push(l1 * l1);
            ents.push(ent);
        }
        l1_sq.push(Summary::of(l1s));
        entropic.push(Summary::of(ents));
    }
    Ok(ChaosReport {
        times: cfg.snapshot_times.clone(),
        l1_sq,
        entropic,
        n_agents: cfg.params.n_agents,
        mu: cfg.params.mu,
        runs: cfg.runs,
        base_seed: cfg.base_seed,
        pinsker_violations,
    })
}

fn per_time(cfg: &EnsembleConfig, f: impl Fn(&EmpiricalMeasure) -> f64) -> Result<Vec<Summary>> {
    let runs = run_snapshots(cfg)?;
    Ok((0..cfg.snapshot_times.len())
        .map(|ti| Summary::of(runs.iter().map(|r| f(&r[ti]))))
        .collect())
}

/// `E sum q_n log(q_n / p*_n)` against the geometric law with mean `mu`.
pub fn chaos_vs_equilibrium(cfg: &EnsembleConfig, mu: u32) -> Result<Vec<Summary>> {
    if mu != cfg.params.mu {
        return Err(Error::InitMismatch(format!(
            "equilibrium mu={mu} differs from ensemble mu={}",
            cfg.params.mu
        )));
    }
    let pstar = geometric_equilibrium(mu, cfg.params.n_max)?;
    per_time(cfg, |q| empirical_relative_entropy(q, &pstar))
}

/// Estimate of `P(r >= r0)` at one time with a Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub t: f64,
    pub hits: usize,
    pub runs: usize,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Wilson score interval for `hits` successes out of `runs`.
pub fn wilson_interval(hits: usize, runs: usize, z: f64) -> (f64, f64) {
    let n = runs as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Fraction of runs with `1 - q_0(t) >= r0`, per snapshot time.
pub fn tail_probability(cfg: &EnsembleConfig, r0: f64) -> Result<Vec<TailEstimate>> {
    let runs = run_snapshots(cfg)?;
    Ok(cfg
        .snapshot_times
        .iter()
        .enumerate()
        .map(|(ti, &t)| {
            let hits = runs.iter().filter(|r| r[ti].r_bar() >= r0).count();
            let (lower, upper) = wilson_interval(hits, cfg.runs, Z_95);
            TailEstimate {
                t,
                hits,
                runs: cfg.runs,
                estimate: hits as f64 / cfg.runs as f64,
                lower,
                upper,
            }
        })
        .collect())
}

/// `E sum_n K^n q_n` per snapshot time.
pub fn moment_track(cfg: &EnsembleConfig, k: f64) -> Result<Vec<Summary>> {
    if !(k > 1.0) {
        return Err(Error::InvalidParams(format!("K must exceed 1, got {k}")));
    }
    per_time(cfg, |q| empirical_exp_moment(q, k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::ModelParams;
    use crate::mean_field::{integrate_datum, OdeConfig};
    use approx::assert_relative_eq;

    fn ensemble(
        n: usize,
        mu: u32,
        runs: usize,
        times: Vec<f64>,
        init: AgentInit,
    ) -> EnsembleConfig {
        EnsembleConfig {
            runs,
            base_seed: 99,
            params: ModelParams::new(n, mu).unwrap(),
            init,
            snapshot_times: times,
        }
    }

    #[test]
    fn zero_at_time_zero() {
        let traj =
            integrate_datum(InitialDatum::Dirac { mu: 10 }, &OdeConfig::new(2.0, 500)).unwrap();
        let cfg = ensemble(200, 10, 4, vec![0.0, 1.0, 2.0], AgentInit::AllEqual);
        let rep = chaos_curves(&cfg, &traj).unwrap();
        assert_eq!(rep.l1_sq[0].mean, 0.0);
        assert_eq!(rep.entropic[0].mean, 0.0);
        assert!(rep.l1_sq.iter().all(|s| s.mean <= 4.0));
        assert_eq!(rep.pinsker_violations, 0);
    }

    #[test]
    fn frozen_without_money() {
        let traj =
            integrate_datum(InitialDatum::Dirac { mu: 0 }, &OdeConfig::new(3.0, 10)).unwrap();
        let mut cfg = ensemble(20, 0, 3, vec![0.0, 1.0, 3.0], AgentInit::AllEqual);
        cfg.params.n_max = 10;
        let rep = chaos_curves(&cfg, &traj).unwrap();
        assert!(rep.l1_sq.iter().chain(&rep.entropic).all(|s| s.mean == 0.0));
        let m = moment_track(&cfg, 1.5).unwrap();
        assert!(m.iter().all(|s| s.mean == 1.0));
    }

    #[test]
    fn mismatches_are_rejected() {
        let traj =
            integrate_datum(InitialDatum::Dirac { mu: 10 }, &OdeConfig::new(2.0, 500)).unwrap();
        let cfg = ensemble(50, 10, 2, vec![0.5], AgentInit::AllEqual);
        assert!(matches!(
            chaos_curves(&cfg, &traj),
            Err(Error::TimeMismatch(_))
        ));
        let cfg = ensemble(50, 10, 2, vec![1.0], AgentInit::SingleRich);
        assert!(matches!(
            chaos_curves(&cfg, &traj),
            Err(Error::InitMismatch(_))
        ));
        let cfg = ensemble(50, 9, 2, vec![1.0], AgentInit::AllEqual);
        assert!(matches!(
            chaos_curves(&cfg, &traj),
            Err(Error::InitMismatch(_))
        ));
    }

    #[test]
    fn single_rich_is_flagged_infinite() {
        let traj =
            integrate_datum(InitialDatum::TwoPoint { mu: 10 }, &OdeConfig::new(1.0, 500)).unwrap();
        let cfg = ensemble(100, 10, 3, vec![0.0], AgentInit::SingleRich);
        let rep = chaos_curves(&cfg, &traj).unwrap();
        // The rich agent holds 1000 > n_max dollars.
        assert_eq!(rep.entropic[0].n_infinite, 3);
        assert!(rep.l1_sq[0].mean > 0.0);
    }

    #[test]
    fn equilibrium_entropy_at_start() {
        let cfg = ensemble(1000, 10, 2, vec![0.0], AgentInit::AllEqual);
        let s = chaos_vs_equilibrium(&cfg, 10).unwrap();
        // log 11 + 10 log(11/10)
        assert_relative_eq!(s[0].mean, 3.350_997_070_841_619, epsilon = 1e-12);
        assert_eq!(s[0].se, 0.0);
        let q = EmpiricalMeasure::from_level_counts(&[1, 2, 1]);
        let p = [0.25, 0.5, 0.25];
        assert_eq!(empirical_relative_entropy(&q, &p), 0.0);
    }

    #[test]
    fn tail_estimates() {
        let cfg = ensemble(100, 10, 30, vec![0.0, 5.0], AgentInit::AllEqual);
        let never = tail_probability(&cfg, 1.0 + 1e-12).unwrap();
        assert!(never
            .iter()
            .all(|e| e.hits == 0 && e.lower == 0.0 && e.upper > 0.0));
        let always = tail_probability(&cfg, 0.0).unwrap();
        assert!(always.iter().all(|e| e.estimate == 1.0));
        let (lo, hi) = wilson_interval(5, 10, Z_95);
        assert_relative_eq!(lo, 0.236_593_090_512_563_94, epsilon = 1e-12);
        assert_relative_eq!(hi, 0.763_406_909_487_436_1, epsilon = 1e-12);
    }

    #[test]
    fn moment_at_start() {
        let cfg = ensemble(300, 10, 3, vec![0.0], AgentInit::AllEqual);
        let m = moment_track(&cfg, 1.05).unwrap();
        assert_relative_eq!(m[0].mean, 1.628_894_626_777_441_4, max_relative = 1e-14);
        assert_eq!(m[0].se, 0.0);
        assert!(moment_track(&cfg, 1.0).is_err());
        let q = EmpiricalMeasure::from_level_counts(&{
            let mut v = vec![0; 2001];
            v[0] = 1;
            v[2000] = 1;
            v
        });
        let big = empirical_exp_moment(&q, 2.0);
        assert!(big.is_infinite());
    }
}
