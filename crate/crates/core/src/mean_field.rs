//! The limiting ODE system `dp/dt = L[p]` on `{0..=n_max}` and its RK4
//! integration.
//!
//! For `n >= 1`, `L[p]_n = p_{n+1} + r p_{n-1} - (1 + r) p_n` and
//! `L[p]_0 = p_1 - r p_0`, with `r = 1 - p_0`. The rate `lambda` is fixed to
//! one; any other value only rescales time.

use serde::{Deserialize, Serialize};

use crate::dist::{geometric_equilibrium, moments, ProbabilityVector};
use crate::entropy::{dissipation, kl_divergence};
use crate::error::{Error, Result};

/// RK4 results below zero but above this are clamped to zero.
pub const CLAMP_THRESHOLD: f64 = -1e-12;

/// Largest mass defect tolerated by [`integrate`].
pub const MAX_MASS_DEFECT: f64 = 1e-6;

/// Treatment of the transition `n_max -> n_max + 1`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Agents at `n_max` cannot receive: a transfer towards them is cancelled,
    /// so rich agents give at rate `s = 1 - p_{n_max}`. Conserves mass and
    /// mean exactly; coincides with `Absorbing` whenever `p_{n_max} = 0`.
    #[default]
    Capped,
    /// `p_{n_max+1} = 0`: mass reaching `n_max + 1` leaves the system.
    Absorbing,
}

impl std::str::FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "capped" => Ok(Self::Capped),
            "absorbing" => Ok(Self::Absorbing),
            other => Err(Error::Parse(format!("unknown boundary {other:?}"))),
        }
    }
}

fn rhs_into(p: &[f64], out: &mut [f64], boundary: Boundary) {
    let n_max = p.len() - 1;
    let r_bar = 1.0 - p[0];
    if n_max == 0 {
        out[0] = 0.0;
        return;
    }
    match boundary {
        Boundary::Absorbing => {
            out[0] = p[1] - r_bar * p[0];
            for k in 1..n_max {
                out[k] = p[k + 1] + r_bar * p[k - 1] - (1.0 + r_bar) * p[k];
            }
            out[n_max] = r_bar * p[n_max - 1] - (1.0 + r_bar) * p[n_max];
        }
        Boundary::Capped => {
            let s = 1.0 - p[n_max];
            out[0] = s * p[1] - r_bar * p[0];
            for k in 1..n_max {
                out[k] = s * p[k + 1] + r_bar * p[k - 1] - (s + r_bar) * p[k];
            }
            out[n_max] = r_bar * p[n_max - 1] - s * p[n_max];
        }
    }
}

/// `L[p]` with the default boundary.
pub fn ode_rhs(p: &ProbabilityVector) -> Vec<f64> {
    ode_rhs_with(p, Boundary::default())
}

pub fn ode_rhs_with(p: &[f64], boundary: Boundary) -> Vec<f64> {
    let mut out = vec![0.0; p.len()];
    rhs_into(p, &mut out, boundary);
    out
}

/// Reusable RK4 stage buffers.
#[derive(Debug, Clone)]
pub struct Rk4 {
    boundary: Boundary,
    k: [Vec<f64>; 4],
    stage: Vec<f64>,
}

impl Rk4 {
    pub fn new(len: usize, boundary: Boundary) -> Self {
        Self {
            boundary,
            k: std::array::from_fn(|_| vec![0.0; len]),
            stage: vec![0.0; len],
        }
    }

    /// Advances `p` in place by `dt`. Returns the mass clamped away from
    /// entries in `[-1e-12, 0)`.
    pub fn step(&mut self, p: &mut [f64], dt: f64) -> Result<f64> {
        let [k1, k2, k3, k4] = &mut self.k;
        let stage = &mut self.stage;
        rhs_into(p, k1, self.boundary);
        for i in 0..p.len() {
            stage[i] = p[i] + 0.5 * dt * k1[i];
        }
        rhs_into(stage, k2, self.boundary);
        for i in 0..p.len() {
            stage[i] = p[i] + 0.5 * dt * k2[i];
        }
        rhs_into(stage, k3, self.boundary);
        for i in 0..p.len() {
            stage[i] = p[i] + dt * k3[i];
        }
        rhs_into(stage, k4, self.boundary);
        let mut clamped = 0.0;
        for i in 0..p.len() {
            let v = p[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            if v < 0.0 {
                if v < CLAMP_THRESHOLD {
                    return Err(Error::NegativeProbability { index: i, value: v });
                }
                clamped -= v;
                p[i] = 0.0;
            } else {
                p[i] = v;
            }
        }
        Ok(clamped)
    }
}

/// One classical RK4 step with the default boundary.
pub fn rk4_step(p: &ProbabilityVector, dt: f64) -> Result<ProbabilityVector> {
    rk4_step_with(p, dt, Boundary::default()).map(|(p, _)| p)
}

/// One RK4 step; also returns the clamped mass.
pub fn rk4_step_with(
    p: &ProbabilityVector,
    dt: f64,
    boundary: Boundary,
) -> Result<(ProbabilityVector, f64)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "dt must be positive, got {dt}"
        )));
    }
    let mut state = p.to_vec();
    let clamped = Rk4::new(state.len(), boundary).step(&mut state, dt)?;
    Ok((ProbabilityVector::from_raw(state), clamped))
}

/// Point mass at `mu`.
pub fn init_dirac(mu: u32, n_max: usize) -> Result<ProbabilityVector> {
    ProbabilityVector::dirac(mu as usize, n_max)
}

/// `p_0 = 1 - mu/n_max`, `p_{n_max} = mu/n_max`: the law of one agent when a
/// single agent initially holds all the money.
pub fn init_two_point(n_max: usize, mu: u32) -> Result<ProbabilityVector> {
    if mu as usize > n_max || n_max == 0 {
        return Err(Error::InvalidParams(format!(
            "two-point init needs 0 < mu={mu} <= n_max={n_max}"
        )));
    }
    let high = f64::from(mu) / n_max as f64;
    let mut v = vec![0.0; n_max + 1];
    v[0] += 1.0 - high;
    v[n_max] += high;
    ProbabilityVector::new(v)
}

/// Named initial data; labels a trajectory so ensembles can be matched to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialDatum {
    Dirac { mu: u32 },
    TwoPoint { mu: u32 },
    Geometric { mu: u32 },
    Custom,
}

impl InitialDatum {
    pub fn build(&self, n_max: usize) -> Result<ProbabilityVector> {
        match *self {
            Self::Dirac { mu } => init_dirac(mu, n_max),
            Self::TwoPoint { mu } => init_two_point(n_max, mu),
            Self::Geometric { mu } => geometric_equilibrium(mu, n_max),
            Self::Custom => Err(Error::InvalidParams(
                "custom initial datum has no builder".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeConfig {
    pub dt: f64,
    pub t_final: f64,
    pub sample_dt: f64,
    pub n_max: usize,
    #[serde(default)]
    pub boundary: Boundary,
    /// Keep every sampled law in the trajectory, not only the observables.
    #[serde(default = "default_true")]
    pub store_snapshots: bool,
}

fn default_true() -> bool {
    true
}

impl OdeConfig {
    /// `dt = 0.01`, one sample per time unit (or per step for short runs).
    pub fn new(t_final: f64, n_max: usize) -> Self {
        let dt = 0.01;
        Self {
            dt,
            t_final,
            sample_dt: if t_final >= 1.0 { 1.0 } else { dt },
            n_max,
            boundary: Boundary::default(),
            store_snapshots: true,
        }
    }

    /// Returns `(steps per sample, number of samples after t = 0)`.
    pub fn schedule(&self) -> Result<(usize, usize)> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.dt <= self.sample_dt && self.sample_dt <= self.t_final) {
            return bad(format!(
                "need dt <= sample_dt <= t_final, got {} / {} / {}",
                self.dt, self.sample_dt, self.t_final
            ));
        }
        let steps = (self.sample_dt / self.dt).round();
        if (steps * self.dt - self.sample_dt).abs() > 1e-9 * self.sample_dt {
            return bad(format!(
                "sample_dt={} is not an integer multiple of dt={}",
                self.sample_dt, self.dt
            ));
        }
        let samples = (self.t_final / self.sample_dt + 1e-9).floor();
        Ok((steps as usize, samples as usize))
    }
}

/// Scalar observables of one snapshot. `h`, `d` and `r_bar` are evaluated on
/// the renormalized law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    /// Relative entropy to the geometric equilibrium.
    pub h: f64,
    /// Entropy dissipation ([`crate::entropy::DissipationReport::effective`]).
    pub d: f64,
    pub r_bar: f64,
    pub mass_defect: f64,
    pub mean_defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub mu: u32,
    pub n_max: usize,
    pub init: InitialDatum,
    pub times: Vec<f64>,
    /// Raw integrator states; empty unless `store_snapshots` was set.
    pub snapshots: Vec<ProbabilityVector>,
    pub observables: Vec<Observables>,
    /// Total mass removed by clamping tiny negative entries.
    pub clamped_mass: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the sample at time `t` (within `1e-9`).
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * t.abs().max(1.0);
        let i = self.times.partition_point(|&s| s < t - tol);
        (i < self.times.len() && (self.times[i] - t).abs() <= tol).then_some(i)
    }

    /// Snapshot `i` rescaled to unit mass.
    pub fn normalized_snapshot(&self, i: usize) -> ProbabilityVector {
        self.snapshots[i].renormalized()
    }

    /// `(t, H)` pairs.
    pub fn entropy_series(&self) -> Vec<(f64, f64)> {
        self.times
            .iter()
            .zip(&self.observables)
            .map(|(&t, o)| (t, o.h))
            .collect()
    }
}

impl Trajectory {
    /// Rebuilds a trajectory (observables included) from sampled laws, for
    /// instance a snapshot file. All laws must share `n_max` and an integer
    /// mean.
    pub fn from_laws(times: Vec<f64>, laws: Vec<ProbabilityVector>) -> Result<Self> {
        if times.len() != laws.len() || laws.is_empty() {
            return Err(Error::InvalidParams(format!(
                "{} times for {} laws",
                times.len(),
                laws.len()
            )));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParams(
                "sample times must be strictly increasing".into(),
            ));
        }
        let n_max = laws[0].n_max();
        if let Some(p) = laws.iter().find(|p| p.n_max() != n_max) {
            return Err(Error::InvalidParams(format!(
                "laws disagree on n_max ({} vs {n_max})",
                p.n_max()
            )));
        }
        let mean = moments(&laws[0]).mean;
        if (mean - mean.round()).abs() > 1e-6 {
            return Err(Error::InvalidParams(format!(
                "mean {mean} is not an integer"
            )));
        }
        let mu = mean.round() as u32;
        let pstar = geometric_equilibrium(mu, n_max)?;
        let observables = laws
            .iter()
            .map(|p| observe(p, &pstar, f64::from(mu)))
            .collect();
        Ok(Self {
            mu,
            n_max,
            init: InitialDatum::Custom,
            times,
            snapshots: laws,
            observables,
            clamped_mass: 0.0,
        })
    }
}

fn observe(p: &[f64], pstar: &[f64], mu: f64) -> Observables {
    let m = moments(p);
    let normalized: Vec<f64> = p.iter().map(|v| v / m.mass).collect();
    Observables {
        h: kl_divergence(&normalized, pstar),
        d: dissipation(&normalized).effective(),
        r_bar: 1.0 - normalized[0],
        mass_defect: (m.mass - 1.0).abs(),
        mean_defect: (m.mean - mu).abs(),
    }
}

/// Integrates from `p0`, labelled as a custom initial datum.
pub fn integrate(p0: &ProbabilityVector, cfg: &OdeConfig) -> Result<Trajectory> {
    integrate_labelled(p0, InitialDatum::Custom, cfg)
}

/// Integrates from a named initial datum.
pub fn integrate_datum(init: InitialDatum, cfg: &OdeConfig) -> Result<Trajectory> {
    let p0 = init.build(cfg.n_max)?;
    integrate_labelled(&p0, init, cfg)
}

fn integrate_labelled(
    p0: &ProbabilityVector,
    init: InitialDatum,
    cfg: &OdeConfig,
) -> Result<Trajectory> {
    let (steps_per_sample, samples) = cfg.schedule()?;
    if p0.n_max() != cfg.n_max {
        return Err(Error::InvalidParams(format!(
            "initial law has n_max={} but config says {}",
            p0.n_max(),
            cfg.n_max
        )));
    }
    let mean = moments(p0).mean;
    if (mean - mean.round()).abs() > 1e-6 || mean < -0.5 {
        return Err(Error::InvalidParams(format!(
            "initial mean {mean} is not a non-negative integer"
        )));
    }
    let mu = mean.round() as u32;
    let pstar = geometric_equilibrium(mu, cfg.n_max)?;

    let mut state = p0.to_vec();
    let mut stepper = Rk4::new(state.len(), cfg.boundary);
    let mut traj = Trajectory {
        mu,
        n_max: cfg.n_max,
        init,
        times: Vec::with_capacity(samples + 1),
        snapshots: Vec::new(),
        observables: Vec::with_capacity(samples + 1),
        clamped_mass: 0.0,
    };
    for k in 0..=samples {
        let t = (k * steps_per_sample) as f64 * cfg.dt;
        if k > 0 {
            for _ in 0..steps_per_sample {
                traj.clamped_mass += stepper.step(&mut state, cfg.dt)?;
            }
        }
        let obs = observe(&state, &pstar, f64::from(mu));
        if obs.mass_defect > MAX_MASS_DEFECT {
            return Err(Error::MassLeak {
                t,
                defect: obs.mass_defect,
            });
        }
        traj.times.push(t);
        traj.observables.push(obs);
        if cfg.store_snapshots {
            traj.snapshots
                .push(ProbabilityVector::from_raw(state.clone()));
        }
    }
    Ok(traj)
}
