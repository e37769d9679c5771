//! Distribution types shared by the mean-field integrator, the agent
//! simulator and the entropy diagnostics.
//!
//! Dense laws on `{0..=n_max}` are [`ProbabilityVector`]s; the state of a
//! finite population is summarized by a sparse [`EmpiricalMeasure`].

use std::collections::BTreeMap;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Allowed `|sum - 1|` when a probability vector is constructed.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Largest geometric tail mass `r*^(n_max+1)` accepted by [`geometric_equilibrium`].
pub const TAIL_TOLERANCE: f64 = 1e-12;

/// Default truncation: 501 components `p_0..=p_500`.
pub const DEFAULT_N_MAX: usize = 500;

/// Population parameters of the exchange model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n_agents: usize,
    /// Average number of dollars per agent.
    pub mu: u32,
    /// Giving rate of a rich agent. Only rescales time.
    pub lambda: f64,
    pub n_max: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            n_agents: 1000,
            mu: 10,
            lambda: 1.0,
            n_max: DEFAULT_N_MAX,
        }
    }
}

impl ModelParams {
    pub fn new(n_agents: usize, mu: u32) -> Result<Self> {
        let params = Self {
            n_agents,
            mu,
            ..Self::default()
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        self.lambda = lambda;
        self.validate()?;
        Ok(self)
    }

    pub fn with_n_max(mut self, n_max: usize) -> Result<Self> {
        self.n_max = n_max;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_agents < 1 {
            return Err(Error::InvalidParams("n_agents must be positive".into()));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::InvalidParams(format!(
                "lambda must be a positive finite rate, got {}",
                self.lambda
            )));
        }
        if self.n_max < self.mu as usize || self.n_max == 0 {
            return Err(Error::InvalidParams(format!(
                "n_max={} must be positive and at least mu={}",
                self.n_max, self.mu
            )));
        }
        Ok(())
    }

    /// Total number of dollars `N * mu`.
    pub fn total(&self) -> u64 {
        self.n_agents as u64 * u64::from(self.mu)
    }
}

/// A truncated probability mass function on `{0, .., n_max}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    /// Validates non-negativity and `|sum - 1| <= MASS_TOLERANCE`.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidDistribution("empty vector".into()));
        }
        if let Some((i, v)) = entries
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidDistribution(format!("entry {i} is {v}")));
        }
        let mass: f64 = entries.iter().sum();
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "mass {mass} differs from 1 by more than {MASS_TOLERANCE:e}"
            )));
        }
        Ok(Self(entries))
    }

    /// Rescales non-negative weights to unit mass.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidDistribution(
                "weights must be finite and non-negative".into(),
            ));
        }
        let mass: f64 = weights.iter().sum();
        if mass <= 0.0 {
            return Err(Error::InvalidDistribution("weights have zero mass".into()));
        }
        Ok(Self(weights.into_iter().map(|v| v / mass).collect()))
    }

    /// Point mass at `index` on `{0..=n_max}`.
    pub fn dirac(index: usize, n_max: usize) -> Result<Self> {
        if index > n_max {
            return Err(Error::InvalidParams(format!(
                "dirac index {index} beyond n_max={n_max}"
            )));
        }
        let mut v = vec![0.0; n_max + 1];
        v[index] = 1.0;
        Ok(Self(v))
    }

    /// Wraps entries that are known to be non-negative without checking mass.
    /// Used for integrator states whose mass may drift through the boundary.
    pub(crate) fn from_raw(entries: Vec<f64>) -> Self {
        debug_assert!(entries.iter().all(|v| *v >= 0.0));
        Self(entries)
    }

    pub fn n_max(&self) -> usize {
        self.0.len() - 1
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn mass(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Copy rescaled to mass exactly one (up to rounding).
    pub fn renormalized(&self) -> Self {
        let mass = self.mass();
        Self(self.0.iter().map(|v| v / mass).collect())
    }
}

impl Deref for ProbabilityVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for ProbabilityVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ProbabilityVector> for Vec<f64> {
    fn from(p: ProbabilityVector) -> Self {
        p.0
    }
}

/// Dollar holdings `S_1..S_N` of a closed population.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentState {
    pub dollars: Vec<u32>,
    pub total: u64,
}

impl AgentState {
    pub fn new(dollars: Vec<u32>) -> Self {
        let total = dollars.iter().map(|&d| u64::from(d)).sum();
        Self { dollars, total }
    }

    pub fn n_agents(&self) -> usize {
        self.dollars.len()
    }

    pub fn is_conserved(&self) -> bool {
        self.dollars.iter().map(|&d| u64::from(d)).sum::<u64>() == self.total
    }
}

/// Sparse histogram `q_n = #{i : S_i = n} / N`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    counts: BTreeMap<usize, usize>,
    n_agents: usize,
}

impl EmpiricalMeasure {
    pub fn from_dollars(dollars: &[u32]) -> Self {
        let mut counts = BTreeMap::new();
        for &d in dollars {
            *counts.entry(d as usize).or_insert(0) += 1;
        }
        Self {
            counts,
            n_agents: dollars.len(),
        }
    }

    /// Builds from `level -> count`; zero counts are dropped.
    pub fn from_counts(counts: BTreeMap<usize, usize>) -> Result<Self> {
        let counts: BTreeMap<usize, usize> = counts.into_iter().filter(|&(_, c)| c > 0).collect();
        let n_agents = counts.values().sum();
        if n_agents == 0 {
            return Err(Error::InvalidParams(
                "empirical measure with no agents".into(),
            ));
        }
        Ok(Self { counts, n_agents })
    }

    /// Builds from a dense per-level count vector.
    pub fn from_level_counts(level_counts: &[u32]) -> Self {
        let counts: BTreeMap<usize, usize> = level_counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(n, &c)| (n, c as usize))
            .collect();
        let n_agents = counts.values().sum();
        Self { counts, n_agents }
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn count(&self, level: usize) -> usize {
        self.counts.get(&level).copied().unwrap_or(0)
    }

    pub fn q(&self, level: usize) -> f64 {
        self.count(level) as f64 / self.n_agents as f64
    }

    /// Occupied levels with their counts, in increasing level order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.counts.iter().map(|(&n, &c)| (n, c))
    }

    pub fn support_len(&self) -> usize {
        self.counts.len()
    }

    pub fn max_level(&self) -> usize {
        self.counts.keys().next_back().copied().unwrap_or(0)
    }

    /// Fraction of rich agents `r = 1 - q_0`.
    pub fn r_bar(&self) -> f64 {
        1.0 - self.q(0)
    }

    pub fn mean(&self) -> f64 {
        let dollars: usize = self.counts.iter().map(|(&n, &c)| n * c).sum();
        dollars as f64 / self.n_agents as f64
    }

    /// The histogram after one agent at `giver` gives a dollar to a distinct
    /// agent at `receiver`: `q + (d_{giver-1} + d_{receiver+1} - d_giver - d_receiver)/N`.
    ///
    /// Panics if the move is not possible from this histogram.
    pub fn after_transfer(&self, giver: usize, receiver: usize) -> Self {
        assert!(giver >= 1, "giver must hold a dollar");
        let mut next = self.clone();
        next.remove_one(giver);
        next.remove_one(receiver);
        *next.counts.entry(giver - 1).or_insert(0) += 1;
        *next.counts.entry(receiver + 1).or_insert(0) += 1;
        next
    }

    fn remove_one(&mut self, level: usize) {
        let c = self
            .counts
            .get_mut(&level)
            .unwrap_or_else(|| panic!("no agent at level {level}"));
        *c -= 1;
        if *c == 0 {
            self.counts.remove(&level);
        }
    }
}

/// Summary moments of a (possibly truncated) law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub mass: f64,
    pub mean: f64,
    pub r_bar: f64,
}

pub fn moments(p: &[f64]) -> Moments {
    let mass = p.iter().sum();
    let mean = p.iter().enumerate().map(|(n, v)| n as f64 * v).sum();
    Moments {
        mass,
        mean,
        r_bar: 1.0 - p.first().copied().unwrap_or(0.0),
    }
}

/// Geometric law `p*_n = (1/(1+mu)) (mu/(1+mu))^n`, truncated at `n_max` and
/// renormalized.
pub fn geometric_equilibrium(mu: u32, n_max: usize) -> Result<ProbabilityVector> {
    let mu_f = f64::from(mu);
    let p0 = 1.0 / (1.0 + mu_f);
    let ratio = mu_f / (1.0 + mu_f);
    let tail = ratio.powi(n_max as i32 + 1);
    if tail > TAIL_TOLERANCE {
        return Err(Error::TailTooHeavy { mu, n_max, tail });
    }
    let mut weights = Vec::with_capacity(n_max + 1);
    let mut term = p0;
    for _ in 0..=n_max {
        weights.push(term);
        term *= ratio;
    }
    ProbabilityVector::normalized(weights)
}

/// `sum_n |a_n - b_n|` over the union of the index ranges.
pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    let len = a.len().max(b.len());
    (0..len)
        .map(|n| {
            let x = a.get(n).copied().unwrap_or(0.0);
            let y = b.get(n).copied().unwrap_or(0.0);
            (x - y).abs()
        })
        .sum()
}

/// `sum_n |q_n - b_n|` without densifying `q`. Levels of `q` beyond `b` count
/// against `b_n = 0`.
pub fn l1_distance_empirical(q: &EmpiricalMeasure, b: &[f64]) -> f64 {
    let n_agents = q.n_agents() as f64;
    let mut total: f64 = b.iter().sum();
    for (level, count) in q.iter() {
        let qn = count as f64 / n_agents;
        let bn = b.get(level).copied().unwrap_or(0.0);
        total += (qn - bn).abs() - bn;
    }
    total.max(0.0)
}

/// Dense copy of `q` on `{0..=n_max}`.
pub fn empirical_to_dense(q: &EmpiricalMeasure, n_max: usize) -> Result<ProbabilityVector> {
    if q.max_level() > n_max {
        return Err(Error::LevelOverflow {
            level: q.max_level(),
            n_max,
        });
    }
    let mut v = vec![0.0; n_max + 1];
    let n_agents = q.n_agents() as f64;
    for (level, count) in q.iter() {
        v[level] = count as f64 / n_agents;
    }
    Ok(ProbabilityVector::from_raw(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn equilibrium_for_mu_ten() {
        let p = geometric_equilibrium(10, 500).unwrap();
        assert_relative_eq!(p[0], 1.0 / 11.0, epsilon = 1e-15);
        let m = moments(&p);
        assert_relative_eq!(m.r_bar, 10.0 / 11.0, epsilon = 1e-15);
        assert!((m.mean - 10.0).abs() < 1e-9);
        assert!((m.mass - 1.0).abs() < 1e-15);
    }

    #[test]
    fn equilibrium_for_mu_zero_is_dirac() {
        let p = geometric_equilibrium(0, 10).unwrap();
        assert_eq!(p[0], 1.0);
        assert!(p[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn equilibrium_for_mu_one_halves() {
        let p = geometric_equilibrium(1, 200).unwrap();
        for (n, v) in p.iter().enumerate().take(60) {
            assert_relative_eq!(*v, 0.5f64.powi(n as i32 + 1), max_relative = 1e-14);
        }
        assert!((moments(&p).mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn heavy_tail_rejected() {
        assert!(matches!(
            geometric_equilibrium(10, 100),
            Err(Error::TailTooHeavy { .. })
        ));
    }

    #[test]
    fn l1_cases() {
        let p = geometric_equilibrium(10, 500).unwrap();
        assert_eq!(l1_distance(&p, &p), 0.0);
        let d0 = ProbabilityVector::dirac(0, 5).unwrap();
        let d1 = ProbabilityVector::dirac(1, 5).unwrap();
        assert_eq!(l1_distance(&d0, &d1), 2.0);
        // Shifted copy; brute-force sum evaluated in extended precision.
        let mut shifted = vec![0.0];
        shifted.extend_from_slice(&p[..500]);
        assert_relative_eq!(
            l1_distance(&p, &shifted),
            0.181_818_181_818_181_82,
            max_relative = 1e-13
        );
    }

    #[test]
    fn moments_of_small_vectors() {
        let d0 = ProbabilityVector::dirac(0, 4).unwrap();
        let m = moments(&d0);
        assert_eq!((m.mass, m.mean, m.r_bar), (1.0, 0.0, 0.0));
        let p = ProbabilityVector::new(vec![0.5, 0.25, 0.25, 0.0, 0.0]).unwrap();
        let m = moments(&p);
        assert_eq!((m.mass, m.mean, m.r_bar), (1.0, 0.75, 0.5));
    }

    #[test]
    fn densify_counts() {
        let q = EmpiricalMeasure::from_dollars(&[1, 1, 0, 2]);
        let p = empirical_to_dense(&q, 5).unwrap();
        assert_eq!(&p[..4], &[0.25, 0.5, 0.25, 0.0]);

        let q = EmpiricalMeasure::from_dollars(&vec![10; 1000]);
        assert_eq!(
            empirical_to_dense(&q, 500).unwrap(),
            ProbabilityVector::dirac(10, 500).unwrap()
        );

        let mut dollars = vec![0u32; 500];
        dollars[499] = 5000;
        let q = EmpiricalMeasure::from_dollars(&dollars);
        assert!((q.q(0) - 0.998).abs() < 1e-15);
        assert!(matches!(
            empirical_to_dense(&q, 500),
            Err(Error::LevelOverflow { level: 5000, .. })
        ));
    }

    #[test]
    fn empirical_l1_matches_dense() {
        let q = EmpiricalMeasure::from_dollars(&[0, 3, 3, 7, 1]);
        let p = geometric_equilibrium(3, 200).unwrap();
        let dense = empirical_to_dense(&q, 200).unwrap();
        assert_relative_eq!(
            l1_distance_empirical(&q, &p),
            l1_distance(&dense, &p),
            epsilon = 1e-14
        );
        // Level beyond the dense range counts fully.
        let q = EmpiricalMeasure::from_dollars(&[0, 300]);
        assert_relative_eq!(
            l1_distance_empirical(&q, &p),
            l1_distance(&[0.5], &p) + 0.5,
            epsilon = 1e-14
        );
    }

    #[test]
    fn transfer_moves_two_agents() {
        let q = EmpiricalMeasure::from_dollars(&[1, 1, 0]);
        let next = q.after_transfer(1, 1);
        assert_eq!(next.count(0), 2);
        assert_eq!(next.count(2), 1);
        assert_eq!(next.n_agents(), 3);
        assert_eq!(next.mean(), q.mean());
    }

    fn arb_weights() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, 1..40)
            .prop_filter("non-zero mass", |w| w.iter().sum::<f64>() > 1e-6)
    }

    proptest! {
        #[test]
        fn normalized_vectors_are_valid(w in arb_weights()) {
            let p = ProbabilityVector::normalized(w).unwrap();
            prop_assert!(ProbabilityVector::new(p.clone().into_inner()).is_ok());
            prop_assert!(p.iter().all(|&v| v >= 0.0));
        }

        #[test]
        fn counting_preserves_mass_and_mean(dollars in prop::collection::vec(0u32..60, 1..200)) {
            let q = EmpiricalMeasure::from_dollars(&dollars);
            let p = empirical_to_dense(&q, 60).unwrap();
            let m = moments(&p);
            let n = dollars.len() as f64;
            prop_assert!((n * m.mass - n).abs() < 1e-9);
            let total: u64 = dollars.iter().map(|&d| u64::from(d)).sum();
            prop_assert!((n * m.mean - total as f64).abs() < 1e-7);
        }

        #[test]
        fn l1_triangle(a in arb_weights(), b in arb_weights(), c in arb_weights()) {
            let (a, b, c) = (
                ProbabilityVector::normalized(a).unwrap(),
                ProbabilityVector::normalized(b).unwrap(),
                ProbabilityVector::normalized(c).unwrap(),
            );
            prop_assert!(l1_distance(&a, &c) <= l1_distance(&a, &b) + l1_distance(&b, &c) + 1e-12);
            prop_assert!((l1_distance(&a, &b) - l1_distance(&b, &a)).abs() < 1e-15);
        }
    }
}
