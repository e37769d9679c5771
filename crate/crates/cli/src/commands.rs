use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;

use exk_core::chaos::{chaos_curves, ChaosReport};
use exk_core::entropy::{default_window, diagnose, fit_sqrt_decay, summarize, DiagnosticsConfig};
use exk_core::io;
use exk_core::mean_field::{
    integrate, integrate_datum, Boundary, InitialDatum, OdeConfig, Trajectory,
};
use exk_core::sim::{new_simulation, validate_small_n, AgentInit, EnsembleConfig};
use exk_core::{ModelParams, DEFAULT_N_MAX};

use crate::{AnalyzeArgs, ChaosArgs, FitArgs, OdeArgs, OracleArgs, OracleMismatch, SimulateArgs};

const VERSION: &str = concat!("exk-", env!("CARGO_PKG_VERSION"));

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(file))
}

/// `-` (or no path) is stdout.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    match path {
        Some(p) if p != Path::new("-") => Ok(Box::new(create(p)?)),
        _ => Ok(Box::new(BufWriter::new(std::io::stdout().lock()))),
    }
}

fn out_dir(dir: Option<PathBuf>) -> Result<PathBuf> {
    let dir = dir.unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if !(v.is_finite() && v > 0.0) {
        bail!(exk_core::Error::InvalidParams(format!(
            "--{name} must be a positive number, got {v}"
        )));
    }
    Ok(v)
}

fn agent_init(kind: Option<&str>, dollars: Option<Vec<u32>>) -> Result<AgentInit> {
    match (kind.unwrap_or("all-equal"), dollars) {
        ("all-equal", None) => Ok(AgentInit::AllEqual),
        ("single-rich", None) => Ok(AgentInit::SingleRich),
        ("custom", Some(d)) => Ok(AgentInit::Custom(d)),
        ("custom", None) => bail!(exk_core::Error::InvalidParams(
            "--init custom needs --dollars".into()
        )),
        (_, Some(_)) => bail!(exk_core::Error::InvalidParams(
            "--dollars requires --init custom".into()
        )),
        (other, None) => bail!(exk_core::Error::InvalidParams(format!(
            "unknown --init {other:?} (all-equal, single-rich or custom)"
        ))),
    }
}

/// `0, dt, 2 dt, ..` up to `t_final`, which is always the last entry.
fn sample_times(t_final: f64, dt: Option<f64>) -> Result<Vec<f64>> {
    let Some(dt) = dt else {
        return Ok(vec![t_final]);
    };
    positive("snapshot-dt", dt)?;
    let k = (t_final / dt + 1e-9).floor() as usize;
    let mut times: Vec<f64> = (0..=k).map(|i| i as f64 * dt).collect();
    if t_final - times[k] > 1e-9 * t_final.max(1.0) {
        times.push(t_final);
    } else {
        times[k] = t_final;
    }
    Ok(times)
}

pub fn ode(a: OdeArgs) -> Result<()> {
    let mu = a.mu.unwrap_or(10);
    let t_final = positive("t-final", a.t_final.unwrap_or(200.0))?;
    let n_max = a.n_max.unwrap_or(DEFAULT_N_MAX);
    let mut cfg = OdeConfig::new(t_final, n_max);
    if let Some(dt) = a.dt {
        cfg.dt = positive("dt", dt)?;
        if a.sample_dt.is_none() && t_final < 1.0 {
            cfg.sample_dt = dt;
        }
    }
    if let Some(s) = a.sample_dt {
        cfg.sample_dt = positive("sample-dt", s)?;
    }
    cfg.boundary = a
        .boundary
        .as_deref()
        .unwrap_or("capped")
        .parse::<Boundary>()?;
    let diagnostics = !a.no_diagnostics.unwrap_or(false);
    let snapshots = a.snapshots.unwrap_or(false);
    cfg.store_snapshots = diagnostics || snapshots;

    let traj = match a.init.as_deref().unwrap_or("dirac") {
        "dirac" => integrate_datum(InitialDatum::Dirac { mu }, &cfg)?,
        "two-point" => integrate_datum(InitialDatum::TwoPoint { mu }, &cfg)?,
        "geom" => integrate_datum(InitialDatum::Geometric { mu }, &cfg)?,
        "file" => {
            let path = a.init_file.as_deref().ok_or_else(|| {
                exk_core::Error::InvalidParams("--init file needs --init-file".into())
            })?;
            let p0 = io::read_law(open(path)?, n_max)
                .with_context(|| format!("reading {}", path.display()))?;
            integrate(&p0, &cfg)?
        }
        other => bail!(exk_core::Error::InvalidParams(format!(
            "unknown --init {other:?} (dirac, two-point, geom or file)"
        ))),
    };

    let dir = out_dir(a.out_dir)?;
    let mut w = create(&dir.join("trajectory.csv"))?;
    io::write_trajectory(&mut w, &traj)?;
    w.flush()?;
    if snapshots {
        let mut w = create(&dir.join("snapshots.csv"))?;
        io::write_snapshots(&mut w, &traj)?;
        w.flush()?;
    }
    let k = a.k.unwrap_or(1.05);
    if diagnostics {
        let dcfg = DiagnosticsConfig {
            k,
            split: a.split,
            ..DiagnosticsConfig::default()
        };
        let rows = diagnose(&traj, &dcfg);
        let mut w = create(&dir.join("diagnostics.csv"))?;
        io::write_diagnostics(&mut w, &rows)?;
        w.flush()?;
        let summary = summarize(&traj, &rows, k, (f64::NEG_INFINITY, f64::INFINITY));
        eprintln!("{}", serde_json::to_string(&summary)?);
    }
    if a.plot.unwrap_or(false) {
        let series = traj.entropy_series();
        let title = format!("{} init, mu = {mu}", a.init.as_deref().unwrap_or("dirac"));
        std::fs::write(
            dir.join("entropy.svg"),
            io::entropy_plot_svg(&series, &title, None),
        )?;
    }
    report_defects(&traj);
    Ok(())
}

fn report_defects(traj: &Trajectory) {
    let max = |f: fn(&exk_core::mean_field::Observables) -> f64| {
        traj.observables.iter().map(f).fold(0.0, f64::max)
    };
    let last = traj
        .observables
        .last()
        .expect("at least the initial sample");
    eprintln!(
        "samples={} H_final={:e} max_mass_defect={:e} max_mean_defect={:e}",
        traj.len(),
        last.h,
        max(|o| o.mass_defect),
        max(|o| o.mean_defect)
    );
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let params = ModelParams::new(a.agents.unwrap_or(1000), a.mu.unwrap_or(10))?
        .with_lambda(a.lambda.unwrap_or(1.0))?;
    let t_final = a.t_final.unwrap_or(50.0);
    if !(t_final.is_finite() && t_final >= 0.0) {
        bail!(exk_core::Error::InvalidParams(format!(
            "--t-final must be non-negative, got {t_final}"
        )));
    }
    let init = agent_init(a.init.as_deref(), a.dollars)?;
    let times = sample_times(t_final, a.snapshot_dt)?;
    let mut sim = new_simulation(params, &init, a.seed.unwrap_or(0))?;

    let mut events = Vec::new();
    let log = a.events.is_some();
    let mut samples = Vec::with_capacity(times.len());
    for &t in &times {
        sim.advance_to_with(t, |e| {
            if log {
                events.push(*e);
            }
        });
        samples.push((t, sim.empirical()));
    }
    let mut w = sink(a.out.as_deref())?;
    io::write_sim_snapshots(&mut w, &samples)?;
    w.flush()?;
    if let Some(path) = a.events {
        let mut w = create(&path)?;
        io::write_events(&mut w, &events)?;
        w.flush()?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ChaosJson<'a> {
    version: &'static str,
    #[serde(rename = "N")]
    n_agents: usize,
    mu: u32,
    #[serde(rename = "M")]
    runs: usize,
    base_seed: u64,
    report: &'a ChaosReport,
}

pub fn chaos(a: ChaosArgs) -> Result<()> {
    let ns = a.agents_list.unwrap_or_else(|| vec![100, 400, 1600]);
    if ns.is_empty() {
        bail!(exk_core::Error::InvalidParams(
            "--agents-list is empty".into()
        ));
    }
    let mu = a.mu.unwrap_or(10);
    let t_final = positive("t-final", a.t_final.unwrap_or(10.0))?;
    let sample_dt = positive("sample-dt", a.sample_dt.unwrap_or(t_final))?;
    let n_max = a.n_max.unwrap_or(DEFAULT_N_MAX);
    let init = agent_init(a.init.as_deref(), None)?;
    let datum = match init {
        AgentInit::SingleRich => InitialDatum::TwoPoint { mu },
        _ => InitialDatum::Dirac { mu },
    };
    let mut cfg = OdeConfig::new(t_final, n_max);
    cfg.sample_dt = sample_dt;
    let traj = integrate_datum(datum, &cfg)?;
    let dir = out_dir(a.out_dir)?;

    for n in ns {
        let ens = EnsembleConfig {
            runs: a.runs.unwrap_or(20),
            base_seed: a.seed.unwrap_or(0),
            params: ModelParams::new(n, mu)?.with_n_max(n_max)?,
            init: init.clone(),
            snapshot_times: traj.times.clone(),
        };
        let report = chaos_curves(&ens, &traj).with_context(|| format!("N = {n}"))?;
        let mut w = create(&dir.join(format!("chaos_N{n}.csv")))?;
        io::write_chaos(&mut w, &report)?;
        w.flush()?;
        let json = ChaosJson {
            version: VERSION,
            n_agents: n,
            mu,
            runs: report.runs,
            base_seed: report.base_seed,
            report: &report,
        };
        std::fs::write(
            dir.join(format!("chaos_N{n}.json")),
            serde_json::to_string_pretty(&json)? + "\n",
        )?;
        let last = report.l1_sq.last().expect("non-empty times");
        eprintln!(
            "N={n} t={} l1_sq={:e} (se {:e}) pinsker_violations={}",
            report.times.last().expect("non-empty times"),
            last.mean,
            last.se,
            report.pinsker_violations
        );
    }
    Ok(())
}

pub fn fit(a: FitArgs) -> Result<()> {
    let input = a
        .input
        .ok_or_else(|| exk_core::Error::InvalidParams("--input is required".into()))?;
    let series = io::read_entropy_series(open(&input)?)
        .with_context(|| format!("reading {}", input.display()))?;
    let t_final = series.last().map_or(0.0, |p| p.0);
    let (lo, hi) = default_window(t_final);
    let window = (a.t_min.unwrap_or(lo), a.t_max.unwrap_or(hi));
    let fit = fit_sqrt_decay(&series, window)?;
    println!("{}", serde_json::to_string_pretty(&fit)?);
    if let Some(path) = a.plot {
        std::fs::write(
            &path,
            io::entropy_plot_svg(&series, "entropy decay", Some(&fit)),
        )
        .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

pub fn oracle(a: OracleArgs) -> Result<()> {
    let params = ModelParams::new(a.agents.unwrap_or(3), a.mu.unwrap_or(1))?;
    let init = agent_init(a.init.as_deref(), a.dollars)?;
    let alpha = a.alpha.unwrap_or(0.01);
    if !(alpha > 0.0 && alpha < 1.0) {
        bail!(exk_core::Error::InvalidParams(format!(
            "--alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let report = validate_small_n(
        &params,
        &init,
        a.runs.unwrap_or(100_000),
        positive("t", a.t.unwrap_or(50.0))?,
        positive("t-long", a.t_long.unwrap_or(200.0))?,
        a.seed.unwrap_or(0),
        alpha,
    )?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    println!("{}", if report.passed { "PASS" } else { "FAIL" });
    if !report.passed {
        return Err(anyhow!(OracleMismatch));
    }
    Ok(())
}

pub fn analyze(a: AnalyzeArgs) -> Result<()> {
    let input = a
        .input
        .ok_or_else(|| exk_core::Error::InvalidParams("--input is required".into()))?;
    let n_max = a.n_max.unwrap_or(DEFAULT_N_MAX);
    let (times, laws) = io::read_snapshots(open(&input)?, n_max)
        .with_context(|| format!("reading {}", input.display()))?;
    let traj = Trajectory::from_laws(times, laws)?;
    let k = a.k.unwrap_or(1.05);
    let cfg = DiagnosticsConfig {
        k,
        split: a.split,
        ..DiagnosticsConfig::default()
    };
    let rows = diagnose(&traj, &cfg);
    let mut w = sink(a.out.as_deref())?;
    io::write_diagnostics(&mut w, &rows)?;
    w.flush()?;
    let summary = summarize(&traj, &rows, k, (f64::NEG_INFINITY, f64::INFINITY));
    eprintln!("{}", serde_json::to_string(&summary)?);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_times_end_at_t_final() {
        assert_eq!(sample_times(5.0, None).unwrap(), vec![5.0]);
        assert_eq!(sample_times(1.0, Some(0.5)).unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(
            sample_times(1.2, Some(0.5)).unwrap(),
            vec![0.0, 0.5, 1.0, 1.2]
        );
        assert_eq!(sample_times(0.3, Some(0.1)).unwrap().len(), 4);
        assert!(sample_times(1.0, Some(0.0)).is_err());
    }

    #[test]
    fn init_flags() {
        assert_eq!(agent_init(None, None).unwrap(), AgentInit::AllEqual);
        assert_eq!(
            agent_init(Some("custom"), Some(vec![1, 2])).unwrap(),
            AgentInit::Custom(vec![1, 2])
        );
        assert!(agent_init(Some("custom"), None).is_err());
        assert!(agent_init(Some("all-equal"), Some(vec![1])).is_err());
        assert!(agent_init(Some("poor"), None).is_err());
    }
}
