use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::state::{new_simulation, AgentInit, SimState};
use crate::dist::{EmpiricalMeasure, ModelParams};
use crate::error::{Error, Result};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "EXK_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub runs: usize,
    pub base_seed: u64,
    pub params: ModelParams,
    pub init: AgentInit,
    /// Non-decreasing sample times, starting at or after 0.
    pub snapshot_times: Vec<f64>,
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.runs == 0 {
            return Err(Error::InvalidParams("runs must be at least 1".into()));
        }
        if self.snapshot_times.is_empty() {
            return Err(Error::InvalidParams("no snapshot times".into()));
        }
        let ordered = self.snapshot_times.windows(2).all(|w| w[0] <= w[1]);
        if !ordered || !(self.snapshot_times[0] >= 0.0) || !self.t_final().is_finite() {
            return Err(Error::InvalidParams(
                "snapshot times must be finite, non-negative and non-decreasing".into(),
            ));
        }
        Ok(())
    }

    pub fn t_final(&self) -> f64 {
        self.snapshot_times.last().copied().unwrap_or(0.0)
    }

    pub fn seed(&self, run: usize) -> u64 {
        run_seed(self.base_seed, run)
    }
}

/// Seed of run `i`: the `i`-th output of a SplitMix64 stream started at
/// `base`. Independent of scheduling.
pub fn run_seed(base: u64, run: usize) -> u64 {
    let mut z = base.wrapping_add(
        (run as u64)
            .wrapping_add(1)
            .wrapping_mul(0x9E37_79B9_7F4A_7C15),
    );
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs `f` on a pool capped by `EXK_THREADS`, or on the global pool.
pub fn with_thread_pool<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    let cap = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0);
    match cap.and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

/// Runs every member simulation through `f`, in parallel, and returns the
/// results in run order. The first failing run (by index) aborts the
/// ensemble.
pub fn run_map<T, F>(cfg: &EnsembleConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &mut SimState) -> Result<T> + Sync,
{
    cfg.validate()?;
    let results: Vec<Result<T>> = with_thread_pool(|| {
        (0..cfg.runs)
            .into_par_iter()
            .map(|run| {
                let seed = cfg.seed(run);
                let mut sim = new_simulation(cfg.params, &cfg.init, seed)?;
                f(run, &mut sim).map_err(|e| Error::RunFailed {
                    run,
                    seed,
                    source: Box::new(e),
                })
            })
            .collect()
    });
    results.into_iter().collect()
}

/// Histograms of every run at every snapshot time: `[run][time]`.
pub fn run_snapshots(cfg: &EnsembleConfig) -> Result<Vec<Vec<EmpiricalMeasure>>> {
    run_map(cfg, |_, sim| {
        Ok(cfg
            .snapshot_times
            .iter()
            .map(|&t| {
                sim.advance_to(t);
                sim.empirical()
            })
            .collect())
    })
}

/// Mean and standard error over the finite samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub se: f64,
    pub n_finite: usize,
    pub n_infinite: usize,
}

impl Summary {
    /// Non-finite values are counted in `n_infinite` and left out.
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let mut finite = Vec::new();
        let mut n_infinite = 0;
        for v in values {
            if v.is_finite() {
                finite.push(v);
            } else {
                n_infinite += 1;
            }
        }
        let n = finite.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                se: f64::NAN,
                n_finite: 0,
                n_infinite,
            };
        }
        let mean = finite.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let var = finite.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            se,
            n_finite: n,
            n_infinite,
        }
    }
}

/// A named pure function of the histogram.
pub struct Observable<'a> {
    pub name: &'a str,
    pub f: &'a (dyn Fn(&EmpiricalMeasure) -> f64 + Sync),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub names: Vec<String>,
    /// `[observable][time]`.
    pub summaries: Vec<Vec<Summary>>,
    pub runs: usize,
}

impl EnsembleStats {
    pub fn series(&self, name: &str) -> Option<&[Summary]> {
        let i = self.names.iter().position(|n| n == name)?;
        Some(&self.summaries[i])
    }
}

pub fn run_ensemble(cfg: &EnsembleConfig, observables: &[Observable<'_>]) -> Result<EnsembleStats> {
    let values: Vec<Vec<Vec<f64>>> = run_map(cfg, |_, sim| {
        Ok(cfg
            .snapshot_times
            .iter()
            .map(|&t| {
                sim.advance_to(t);
                let q = sim.empirical();
                observables.iter().map(|o| (o.f)(&q)).collect()
            })
            .collect())
    })?;
    let summaries = (0..observables.len())
        .map(|k| {
            (0..cfg.snapshot_times.len())
                .map(|ti| Summary::of(values.iter().map(|run| run[ti][k])))
                .collect()
        })
        .collect();
    Ok(EnsembleStats {
        times: cfg.snapshot_times.clone(),
        names: observables.iter().map(|o| o.name.to_string()).collect(),
        summaries,
        runs: cfg.runs,
    })
}
