//! Python bindings: `import exk`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use exk_core::chaos;
use exk_core::entropy::{self, DiagnosticsConfig};
use exk_core::mean_field::{self, Boundary, InitialDatum, OdeConfig};
use exk_core::sim::{self, AgentInit, EnsembleConfig, SimState, Step};
use exk_core::{Error, ModelParams, ProbabilityVector};

fn py_err(e: Error) -> PyErr {
    if e.is_numerical() {
        PyArithmeticError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

trait OrPy<T> {
    fn or_py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for exk_core::Result<T> {
    fn or_py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn agent_init(kind: &str, dollars: Option<Vec<u32>>) -> PyResult<AgentInit> {
    match (kind, dollars) {
        ("all-equal", None) => Ok(AgentInit::AllEqual),
        ("single-rich", None) => Ok(AgentInit::SingleRich),
        ("custom", Some(d)) => Ok(AgentInit::Custom(d)),
        (kind, _) => Err(PyValueError::new_err(format!(
            "init {kind:?} with these dollars is not valid (all-equal, single-rich, or custom with dollars)"
        ))),
    }
}

/// Geometric law with mean `mu` on `0..=n_max`.
#[pyfunction]
#[pyo3(signature = (mu, n_max = 500))]
fn geometric_equilibrium(mu: u32, n_max: usize) -> PyResult<Vec<f64>> {
    Ok(exk_core::geometric_equilibrium(mu, n_max)
        .or_py()?
        .into_inner())
}

/// Right-hand side of the mean-field ODE.
#[pyfunction]
#[pyo3(signature = (p, boundary = "capped"))]
fn ode_rhs(p: Vec<f64>, boundary: &str) -> PyResult<Vec<f64>> {
    let p = ProbabilityVector::new(p).or_py()?;
    let boundary: Boundary = boundary.parse().or_py()?;
    Ok(mean_field::ode_rhs_with(&p, boundary))
}

/// `sum p_n log(p_n / q_n)`.
#[pyfunction]
fn relative_entropy(p: Vec<f64>, q: Vec<f64>) -> f64 {
    entropy::kl_divergence(&p, &q)
}

/// Entropy dissipation `D(p)`; `inf` when a neighbouring pair is half zero.
#[pyfunction]
fn dissipation(p: Vec<f64>) -> f64 {
    entropy::dissipation(&p).value
}

#[pyfunction]
fn exp_moment(p: Vec<f64>, k: f64) -> PyResult<f64> {
    if !(k > 0.0) {
        return Err(PyValueError::new_err("K must be positive"));
    }
    Ok(entropy::exp_moment(&p, k).value)
}

/// Fits `H ~ c1 exp(-c2 sqrt t)`; returns `(c1, c2, r_squared)`.
#[pyfunction]
#[pyo3(signature = (t, h, t_min = None, t_max = None))]
fn fit_sqrt_decay(
    t: Vec<f64>,
    h: Vec<f64>,
    t_min: Option<f64>,
    t_max: Option<f64>,
) -> PyResult<(f64, f64, f64)> {
    if t.len() != h.len() {
        return Err(PyValueError::new_err("t and h differ in length"));
    }
    let (lo, hi) = entropy::default_window(t.last().copied().unwrap_or(0.0));
    let series: Vec<(f64, f64)> = t.into_iter().zip(h).collect();
    let fit =
        entropy::fit_sqrt_decay(&series, (t_min.unwrap_or(lo), t_max.unwrap_or(hi))).or_py()?;
    Ok((fit.c1, fit.c2, fit.r_squared))
}

#[pyfunction]
fn run_seed(base: u64, run: usize) -> u64 {
    sim::run_seed(base, run)
}

/// Sampled mean-field trajectory.
#[pyclass(name = "Trajectory", module = "exk", frozen)]
struct PyTrajectory {
    inner: mean_field::Trajectory,
}

impl PyTrajectory {
    fn column(&self, f: fn(&mean_field::Observables) -> f64) -> Vec<f64> {
        self.inner.observables.iter().map(f).collect()
    }
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn mu(&self) -> u32 {
        self.inner.mu
    }

    #[getter]
    fn n_max(&self) -> usize {
        self.inner.n_max
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times.clone()
    }

    #[getter]
    fn entropy(&self) -> Vec<f64> {
        self.column(|o| o.h)
    }

    #[getter]
    fn dissipation(&self) -> Vec<f64> {
        self.column(|o| o.d)
    }

    #[getter]
    fn r_bar(&self) -> Vec<f64> {
        self.column(|o| o.r_bar)
    }

    #[getter]
    fn mass_defect(&self) -> Vec<f64> {
        self.column(|o| o.mass_defect)
    }

    #[getter]
    fn mean_defect(&self) -> Vec<f64> {
        self.column(|o| o.mean_defect)
    }

    /// Law at sample `i`.
    fn snapshot(&self, i: usize) -> PyResult<Vec<f64>> {
        self.inner
            .snapshots
            .get(i)
            .map(|p| p.to_vec())
            .ok_or_else(|| PyValueError::new_err(format!("no snapshot {i}")))
    }

    /// Diagnostic rows as dicts keyed like the diagnostics CSV.
    #[pyo3(signature = (k = 1.05))]
    fn diagnostics<'py>(&self, py: Python<'py>, k: f64) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let cfg = DiagnosticsConfig {
            k,
            ..DiagnosticsConfig::default()
        };
        entropy::diagnose(&self.inner, &cfg)
            .iter()
            .map(|r| {
                let d = PyDict::new(py);
                for (key, v) in [
                    ("t", r.t),
                    ("H", r.h),
                    ("D", r.d),
                    ("pillar_ratio", r.pillar_ratio),
                    ("thm1_ratio", r.thm1_ratio),
                    ("thm2_ratio", r.thm2_ratio),
                    ("exp_moment", r.exp_moment),
                    ("B1", r.b1),
                    ("B2", r.b2),
                    ("H_int", r.h_int),
                ] {
                    d.set_item(key, v)?;
                }
                Ok(d)
            })
            .collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Integrates the mean-field ODE from `dirac`, `two-point`, `geom`, or the
/// law `p0`.
#[pyfunction]
#[pyo3(signature = (init = "dirac", mu = 10, t_final = 200.0, n_max = 500, dt = 0.01, sample_dt = None, boundary = "capped", p0 = None))]
#[allow(clippy::too_many_arguments)]
fn integrate(
    py: Python<'_>,
    init: &str,
    mu: u32,
    t_final: f64,
    n_max: usize,
    dt: f64,
    sample_dt: Option<f64>,
    boundary: &str,
    p0: Option<Vec<f64>>,
) -> PyResult<PyTrajectory> {
    let mut cfg = OdeConfig::new(t_final, n_max);
    cfg.dt = dt;
    cfg.sample_dt = sample_dt.unwrap_or(if t_final >= 1.0 { 1.0 } else { dt });
    cfg.boundary = boundary.parse().or_py()?;
    let datum = match (init, p0) {
        ("dirac", None) => Ok(InitialDatum::Dirac { mu }),
        ("two-point", None) => Ok(InitialDatum::TwoPoint { mu }),
        ("geom", None) => Ok(InitialDatum::Geometric { mu }),
        ("custom", Some(p)) => Err(p),
        _ => {
            return Err(PyValueError::new_err(
                "init must be dirac, two-point or geom, or custom with p0",
            ))
        }
    };
    let inner = match datum {
        Ok(d) => py.detach(|| mean_field::integrate_datum(d, &cfg)),
        Err(mut p) => {
            p.resize(n_max + 1, 0.0);
            let p = ProbabilityVector::new(p).or_py()?;
            py.detach(|| mean_field::integrate(&p, &cfg))
        }
    }
    .or_py()?;
    Ok(PyTrajectory { inner })
}

/// One N-agent run of the exchange chain.
#[pyclass(name = "Simulation", module = "exk")]
struct PySimulation {
    inner: SimState,
}

#[pymethods]
impl PySimulation {
    #[new]
    #[pyo3(signature = (agents, mu, seed = 0, init = "all-equal", dollars = None, rate = 1.0))]
    fn new(
        agents: usize,
        mu: u32,
        seed: u64,
        init: &str,
        dollars: Option<Vec<u32>>,
        rate: f64,
    ) -> PyResult<Self> {
        let params = ModelParams::new(agents, mu)
            .or_py()?
            .with_lambda(rate)
            .or_py()?;
        let init = agent_init(init, dollars)?;
        let inner = sim::new_simulation(params, &init, seed).or_py()?;
        Ok(Self { inner })
    }

    /// Runs until time `t`.
    fn advance_to(&mut self, t: f64) -> PyResult<()> {
        if !(t >= self.inner.time()) {
            return Err(PyValueError::new_err(format!(
                "cannot go back from {} to {t}",
                self.inner.time()
            )));
        }
        self.inner.advance_to(t);
        Ok(())
    }

    /// Next event as `(time, giver, receiver)`, or `None` when frozen.
    fn step(&mut self) -> Option<(f64, usize, usize)> {
        match self.inner.gillespie_step() {
            Step::Event(e) => Some((e.time, e.giver, e.receiver)),
            Step::Absorbed => None,
        }
    }

    #[getter]
    fn time(&self) -> f64 {
        self.inner.time()
    }

    #[getter]
    fn event_count(&self) -> u64 {
        self.inner.event_count()
    }

    #[getter]
    fn dollars(&self) -> Vec<u32> {
        self.inner.dollars().to_vec()
    }

    /// `{level: count}` over occupied levels.
    fn histogram(&self) -> std::collections::BTreeMap<usize, usize> {
        self.inner.empirical().iter().collect()
    }
}

/// Chaos metrics against the mean-field law; a dict of per-time columns.
#[pyfunction]
#[pyo3(signature = (agents, mu, runs, times, seed = 0, init = "all-equal", n_max = 500))]
#[allow(clippy::too_many_arguments)]
fn chaos_curves<'py>(
    py: Python<'py>,
    agents: usize,
    mu: u32,
    runs: usize,
    times: Vec<f64>,
    seed: u64,
    init: &str,
    n_max: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let init = agent_init(init, None)?;
    let datum = match init {
        AgentInit::SingleRich => InitialDatum::TwoPoint { mu },
        _ => InitialDatum::Dirac { mu },
    };
    let t_final = times.iter().copied().fold(0.0, f64::max);
    let mut ode = OdeConfig::new(t_final.max(0.01), n_max);
    ode.sample_dt = 0.01;
    ode.t_final = t_final.max(0.01);
    let cfg = EnsembleConfig {
        runs,
        base_seed: seed,
        params: ModelParams::new(agents, mu)
            .or_py()?
            .with_n_max(n_max)
            .or_py()?,
        init,
        snapshot_times: times,
    };
    let report = py
        .detach(|| {
            let traj = mean_field::integrate_datum(datum, &ode)?;
            chaos::chaos_curves(&cfg, &traj)
        })
        .or_py()?;
    let d = PyDict::new(py);
    d.set_item("t", report.times.clone())?;
    d.set_item(
        "l1_sq_mean",
        report.l1_sq.iter().map(|s| s.mean).collect::<Vec<_>>(),
    )?;
    d.set_item(
        "l1_sq_se",
        report.l1_sq.iter().map(|s| s.se).collect::<Vec<_>>(),
    )?;
    d.set_item(
        "entropic_mean",
        report.entropic.iter().map(|s| s.mean).collect::<Vec<_>>(),
    )?;
    d.set_item(
        "entropic_se",
        report.entropic.iter().map(|s| s.se).collect::<Vec<_>>(),
    )?;
    d.set_item(
        "infinite_count",
        report
            .entropic
            .iter()
            .map(|s| s.n_infinite)
            .collect::<Vec<_>>(),
    )?;
    d.set_item("pinsker_violations", report.pinsker_violations)?;
    Ok(d)
}

/// Simulator versus exact small-N generator; a dict with `passed`.
#[pyfunction]
#[pyo3(signature = (agents = 3, mu = 1, runs = 100_000, t = 50.0, t_long = 200.0, seed = 0, alpha = 0.01))]
#[allow(clippy::too_many_arguments)]
fn oracle<'py>(
    py: Python<'py>,
    agents: usize,
    mu: u32,
    runs: usize,
    t: f64,
    t_long: f64,
    seed: u64,
    alpha: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let params = ModelParams::new(agents, mu).or_py()?;
    let r = py
        .detach(|| {
            sim::validate_small_n(&params, &AgentInit::AllEqual, runs, t, t_long, seed, alpha)
        })
        .or_py()?;
    let d = PyDict::new(py);
    d.set_item("n_states", r.n_states)?;
    d.set_item("chi_square", r.chi_square)?;
    d.set_item("critical_value", r.critical_value)?;
    d.set_item("degrees_of_freedom", r.degrees_of_freedom)?;
    d.set_item("max_uniform_z", r.max_uniform_z)?;
    d.set_item("passed", r.passed)?;
    Ok(d)
}

#[pymodule]
fn exk(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PySimulation>()?;
    m.add_function(wrap_pyfunction!(geometric_equilibrium, m)?)?;
    m.add_function(wrap_pyfunction!(ode_rhs, m)?)?;
    m.add_function(wrap_pyfunction!(relative_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(dissipation, m)?)?;
    m.add_function(wrap_pyfunction!(exp_moment, m)?)?;
    m.add_function(wrap_pyfunction!(fit_sqrt_decay, m)?)?;
    m.add_function(wrap_pyfunction!(run_seed, m)?)?;
    m.add_function(wrap_pyfunction!(integrate, m)?)?;
    m.add_function(wrap_pyfunction!(chaos_curves, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    Ok(())
}
