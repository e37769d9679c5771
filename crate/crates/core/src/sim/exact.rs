//! Exact generator of the N-agent chain for tiny populations, used as an
//! oracle for the simulator.

use std::collections::HashMap;

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::gamma::ln_gamma;

use super::ensemble::{run_map, EnsembleConfig};
use super::state::AgentInit;
use crate::dist::ModelParams;
use crate::error::{Error, Result};

pub const MAX_AGENTS: usize = 6;
pub const MAX_DOLLARS: u64 = 8;
pub const MAX_STATES: usize = 10_000;

/// Rate matrix over all compositions of `N mu` into `N` parts.
#[derive(Debug, Clone)]
pub struct ExactGenerator {
    states: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, usize>,
    /// Row-major `Q[i][j]`.
    rates: Vec<f64>,
}

fn binomial(n: u64, k: u64) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * u128::from(n - i) / u128::from(i + 1))
}

fn compositions(total: u32, parts: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if parts == 1 {
        prefix.push(total);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for first in (0..=total).rev() {
        prefix.push(first);
        compositions(total - first, parts - 1, prefix, out);
        prefix.pop();
    }
}

/// Builds the rate matrix: `lambda / N` on every move `i -> j`, `i != j`,
/// `S_i >= 1`; diagonal entries make rows sum to zero.
pub fn exact_generator_small(params: &ModelParams) -> Result<ExactGenerator> {
    params.validate()?;
    let n = params.n_agents;
    let total = params.total();
    let states = binomial(total + n as u64 - 1, n as u64 - 1);
    if n > MAX_AGENTS || total > MAX_DOLLARS || states > MAX_STATES as u128 {
        return Err(Error::StateSpaceTooLarge {
            states,
            limit: MAX_STATES,
        });
    }
    let mut list = Vec::with_capacity(states as usize);
    compositions(total as u32, n, &mut Vec::with_capacity(n), &mut list);
    let index: HashMap<Vec<u32>, usize> = list
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i))
        .collect();
    let size = list.len();
    let mut rates = vec![0.0; size * size];
    let pair_rate = params.lambda / n as f64;
    for (a, s) in list.iter().enumerate() {
        for i in (0..n).filter(|&i| s[i] >= 1) {
            for j in (0..n).filter(|&j| j != i) {
                let mut next = s.clone();
                next[i] -= 1;
                next[j] += 1;
                let b = index[&next];
                rates[a * size + b] += pair_rate;
                rates[a * size + a] -= pair_rate;
            }
        }
    }
    Ok(ExactGenerator {
        states: list,
        index,
        rates,
    })
}

impl ExactGenerator {
    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[Vec<u32>] {
        &self.states
    }

    pub fn index_of(&self, dollars: &[u32]) -> Option<usize> {
        self.index.get(dollars).copied()
    }

    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.rates[from * self.n_states() + to]
    }

    /// `max_i |sum_j Q[i][j]|`.
    pub fn max_row_sum(&self) -> f64 {
        let n = self.n_states();
        (0..n)
            .map(|i| self.rates[i * n..(i + 1) * n].iter().sum::<f64>().abs())
            .fold(0.0, f64::max)
    }

    /// `x Q` for a row vector `x`.
    pub fn left_apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n_states();
        let mut out = vec![0.0; n];
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                for (o, q) in out.iter_mut().zip(&self.rates[i * n..(i + 1) * n]) {
                    *o += xi * q;
                }
            }
        }
        out
    }

    pub fn uniform(&self) -> Vec<f64> {
        vec![1.0 / self.n_states() as f64; self.n_states()]
    }

    /// `max_j |(pi Q)_j|`.
    pub fn stationarity_residual(&self, pi: &[f64]) -> f64 {
        self.left_apply(pi).iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `p0 exp(t Q)` by uniformization, with Poisson weights in log space.
    pub fn transient(&self, p0: &[f64], t: f64) -> Vec<f64> {
        let n = self.n_states();
        let rate = (0..n).map(|i| -self.rates[i * n + i]).fold(0.0, f64::max);
        if rate == 0.0 || t == 0.0 {
            return p0.to_vec();
        }
        let lt = rate * t;
        // P = I + Q / rate
        let step = |x: &[f64]| -> Vec<f64> {
            let qx = self.left_apply(x);
            x.iter().zip(qx).map(|(a, b)| a + b / rate).collect()
        };
        let mut out = vec![0.0; n];
        let mut x = p0.to_vec();
        let mut weight_sum = 0.0;
        let k_max = (lt + 40.0 * lt.sqrt() + 100.0) as usize;
        for k in 0..=k_max {
            let w = (k as f64 * lt.ln() - lt - ln_gamma(k as f64 + 1.0)).exp();
            for (o, v) in out.iter_mut().zip(&x) {
                *o += w * v;
            }
            weight_sum += w;
            if k as f64 > lt && 1.0 - weight_sum < 1e-16 {
                break;
            }
            x = step(&x);
        }
        out
    }
}

/// Outcome of the simulator-versus-generator comparison.
#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub n_agents: usize,
    pub mu: u32,
    pub runs: usize,
    pub n_states: usize,
    pub max_row_sum: f64,
    pub uniform_residual: f64,
    pub t: f64,
    pub chi_square: f64,
    pub degrees_of_freedom: usize,
    pub critical_value: f64,
    pub t_long: f64,
    /// Largest `|count - expected| / sigma` under the uniform law at `t_long`.
    pub max_uniform_z: f64,
    pub passed: bool,
}

/// Simulates `runs` copies from `init` and compares the state occupancy at
/// `t` with `p0 exp(tQ)` (chi-square at level `alpha`), and at `t_long` with
/// the uniform law (every state within 3 sigma).
pub fn validate_small_n(
    params: &ModelParams,
    init: &AgentInit,
    runs: usize,
    t: f64,
    t_long: f64,
    base_seed: u64,
    alpha: f64,
) -> Result<OracleReport> {
    let gen = exact_generator_small(params)?;
    let n_states = gen.n_states();
    let start = gen
        .index_of(&init.dollars(params)?)
        .expect("initial allocation is a composition");
    let mut p0 = vec![0.0; n_states];
    p0[start] = 1.0;
    let expected = gen.transient(&p0, t);

    let cfg = EnsembleConfig {
        runs,
        base_seed,
        params: *params,
        init: init.clone(),
        snapshot_times: vec![t, t_long],
    };
    let visits = run_map(&cfg, |_, sim| {
        sim.advance_to(t);
        let a = gen.index_of(sim.dollars()).expect("state in enumeration");
        Ok(a)
    })?;
    // Independent runs for the long-time check.
    let long_cfg = EnsembleConfig {
        base_seed: base_seed ^ 0x5DEE_CE66_D1CE_4E5B,
        ..cfg
    };
    let long_visits = run_map(&long_cfg, |_, sim| {
        sim.advance_to(t_long);
        Ok(gen.index_of(sim.dollars()).expect("state in enumeration"))
    })?;

    let mut counts = vec![0usize; n_states];
    visits.iter().for_each(|&a| counts[a] += 1);
    let m = runs as f64;
    let mut chi_square = 0.0;
    let mut dof = 0usize;
    for (c, e) in counts.iter().zip(&expected) {
        let e = e * m;
        if e > 0.0 {
            chi_square += (*c as f64 - e).powi(2) / e;
            dof += 1;
        }
    }
    let dof = dof.saturating_sub(1).max(1);
    let critical_value = ChiSquared::new(dof as f64)
        .map_err(|e| Error::InvalidParams(e.to_string()))?
        .inverse_cdf(1.0 - alpha);

    let mut long_counts = vec![0usize; n_states];
    long_visits.iter().for_each(|&a| long_counts[a] += 1);
    let pu = 1.0 / n_states as f64;
    let sigma = (m * pu * (1.0 - pu)).sqrt();
    let max_uniform_z = long_counts
        .iter()
        .map(|&c| {
            if sigma > 0.0 {
                (c as f64 - m * pu).abs() / sigma
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max);

    let max_row_sum = gen.max_row_sum();
    let uniform_residual = gen.stationarity_residual(&gen.uniform());
    let passed = chi_square <= critical_value
        && max_uniform_z <= 3.0
        && max_row_sum <= 1e-12
        && uniform_residual <= 1e-12;
    Ok(OracleReport {
        n_agents: params.n_agents,
        mu: params.mu,
        runs,
        n_states,
        max_row_sum,
        uniform_residual,
        t,
        chi_square,
        degrees_of_freedom: dof,
        critical_value,
        t_long,
        max_uniform_z,
        passed,
    })
}
