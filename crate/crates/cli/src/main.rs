//! `exk`: experiments on the unbiased money-exchange model.

mod commands;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

const ABOUT: &str = "Mean-field integration, agent simulation and entropy diagnostics \
for the unbiased money-exchange model.";

const LONG_ABOUT: &str = "Mean-field integration, agent simulation and entropy diagnostics \
for the unbiased money-exchange model.

Every command is deterministic given its flags and seeds. Numbers in CSV output carry 17 \
significant digits and parse back to the same double.

Configuration: --config FILE reads a JSON object whose keys are the long flag names of the \
command with '-' replaced by '_' (for example {\"mu\": 10, \"t_final\": 200}). Flags given on \
the command line win over the file.

Environment: EXK_THREADS caps the number of worker threads used by ensembles.

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 oracle mismatch.";

const ODE_HELP: &str = "Files written to --out-dir:
  trajectory.csv   t,H,D,r_bar,mass_defect,mean_defect
  diagnostics.csv  t,H,D,pillar_ratio,thm1_ratio,thm2_ratio,exp_moment,B1,B2,H_int
  snapshots.csv    t,n,p_n  (with --snapshots; rows only for p_n > 1e-300)
  entropy.svg      ln H against sqrt t  (with --plot)
H is the relative entropy to the geometric law, D the entropy dissipation. Undefined \
diagnostics are written as NaN.
--init file reads --init-file, either `n,p_n` or `t,n,p_n` (first sample time).";

const SIMULATE_HELP: &str = "Snapshot CSV (--out, default stdout): t,n,count,q_n, one row per \
occupied level. Without --snapshot-dt only the final time is sampled; with it the times are \
0, dt, 2dt, .. up to --t-final.
Event log (--events): time,giver,receiver, agents indexed from 0.";

const CHAOS_HELP: &str = "For each N, writes chaos_N<N>.csv \
(t,l1_sq_mean,l1_sq_se,entropic_mean,entropic_se,infinite_count) and chaos_N<N>.json (the same \
report with N, mu, runs, base_seed, pinsker_violations and the exk version) to --out-dir.
all-equal agents are compared with the dirac mean-field law, single-rich with two-point. \
Runs whose entropic metric is infinite are counted in infinite_count and left out of its mean.";

const FIT_HELP: &str =
    "Reads a trajectory CSV (columns t and H) and fits ln H = ln C1 - C2 sqrt t \
by least squares on [t_min, t_max]. Prints JSON {c1, c2, r_squared, window, n_points}. The \
default window is [t_final/10, t_final].";

const ORACLE_HELP: &str = "Compares the simulator with the exact generator on all compositions \
(N <= 6, N*mu <= 8): a chi-square test at level --alpha between the simulated occupancy at --t \
and p0 exp(tQ), and a 3 sigma check of the occupancy at --t-long against the uniform law. \
Prints a JSON report and exits with code 4 if either check fails.";

const ANALYZE_HELP: &str = "Reads a snapshot CSV (t,n,p_n) and writes the diagnostics CSV \
t,H,D,pillar_ratio,thm1_ratio,thm2_ratio,exp_moment,B1,B2,H_int to --out (default stdout). \
A JSON summary (t_star, suprema) goes to stderr.";

#[derive(Parser, Debug)]
#[command(name = "exk", version, about = ABOUT, long_about = LONG_ABOUT)]
struct Cli {
    /// JSON file with default values for the command's flags.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate the mean-field ODE and export observables and diagnostics.
    #[command(after_long_help = ODE_HELP)]
    Ode(OdeArgs),
    /// Simulate one N-agent run with the exact event-driven algorithm.
    #[command(after_long_help = SIMULATE_HELP)]
    Simulate(SimulateArgs),
    /// Chaos metrics between ensembles and the mean-field law.
    #[command(after_long_help = CHAOS_HELP)]
    Chaos(ChaosArgs),
    /// Fit the sqrt-exponential decay of H from a trajectory file.
    #[command(after_long_help = FIT_HELP)]
    Fit(FitArgs),
    /// Validate the simulator against the exact small-N generator.
    #[command(after_long_help = ORACLE_HELP)]
    Oracle(OracleArgs),
    /// Entropy diagnostics over an existing snapshot file.
    #[command(after_long_help = ANALYZE_HELP)]
    Analyze(AnalyzeArgs),
}

/// Fills every unset field of `$a` from `$b`.
macro_rules! overlay {
    ($ty:ident { $($field:ident),* $(,)? }) => {
        impl Overlay for $ty {
            fn overlay(mut self, file: Self) -> Self {
                $(if self.$field.is_none() { self.$field = file.$field; })*
                self
            }
        }
    };
}

trait Overlay: Sized {
    fn overlay(self, file: Self) -> Self;
}

#[derive(Args, Deserialize, Debug, Default)]
#[serde(default, deny_unknown_fields)]
pub struct OdeArgs {
    /// Mean wealth (integer) [default: 10]
    #[arg(long)]
    pub mu: Option<u32>,
    /// Initial law: dirac, two-point, geom or file [default: dirac]
    #[arg(long)]
    pub init: Option<String>,
    /// Law for --init file.
    #[arg(long, value_name = "CSV")]
    pub init_file: Option<PathBuf>,
    /// Final time [default: 200]
    #[arg(long)]
    pub t_final: Option<f64>,
    /// RK4 step [default: 0.01]
    #[arg(long)]
    pub dt: Option<f64>,
    /// Sampling interval, a multiple of dt [default: 1, or dt if t_final < 1]
    #[arg(long)]
    pub sample_dt: Option<f64>,
    /// Truncation level; the law has n_max + 1 components [default: 500]
    #[arg(long)]
    pub n_max: Option<usize>,
    /// capped or absorbing [default: capped]
    #[arg(long)]
    pub boundary: Option<String>,
    /// Output directory [default: .]
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Also write snapshots.csv.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub snapshots: Option<bool>,
    /// Also write entropy.svg.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub plot: Option<bool>,
    /// Skip diagnostics.csv.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub no_diagnostics: Option<bool>,
    /// K of the exponential moment and the t* test [default: 1.05]
    #[arg(long)]
    pub k: Option<f64>,
    /// Split index m0 of the interpolated equilibrium [default: median]
    #[arg(long)]
    pub split: Option<usize>,
}
overlay!(OdeArgs {
    mu,
    init,
    init_file,
    t_final,
    dt,
    sample_dt,
    n_max,
    boundary,
    out_dir,
    snapshots,
    plot,
    no_diagnostics,
    k,
    split
});

#[derive(Args, Deserialize, Debug, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateArgs {
    /// Number of agents N [default: 1000]
    #[arg(long)]
    pub agents: Option<usize>,
    /// Mean wealth [default: 10]
    #[arg(long)]
    pub mu: Option<u32>,
    /// Final time [default: 50]
    #[arg(long)]
    pub t_final: Option<f64>,
    /// Seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// all-equal, single-rich or custom [default: all-equal]
    #[arg(long)]
    pub init: Option<String>,
    /// Comma-separated dollars for --init custom.
    #[arg(long, value_delimiter = ',')]
    pub dollars: Option<Vec<u32>>,
    /// Giving rate [default: 1]
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Sampling interval.
    #[arg(long)]
    pub snapshot_dt: Option<f64>,
    /// Snapshot CSV path, '-' for stdout [default: -]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Event log CSV path.
    #[arg(long)]
    pub events: Option<PathBuf>,
}
overlay!(SimulateArgs {
    agents,
    mu,
    t_final,
    seed,
    init,
    dollars,
    lambda,
    snapshot_dt,
    out,
    events
});

#[derive(Args, Deserialize, Debug, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ChaosArgs {
    /// Comma-separated population sizes [default: 100,400,1600]
    #[arg(long, value_delimiter = ',')]
    pub agents_list: Option<Vec<usize>>,
    /// Mean wealth [default: 10]
    #[arg(long)]
    pub mu: Option<u32>,
    /// Runs per population size [default: 20]
    #[arg(long)]
    pub runs: Option<usize>,
    /// Final time [default: 10]
    #[arg(long)]
    pub t_final: Option<f64>,
    /// Sampling interval, a multiple of 0.01 [default: t_final]
    #[arg(long)]
    pub sample_dt: Option<f64>,
    /// Base seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// all-equal or single-rich [default: all-equal]
    #[arg(long)]
    pub init: Option<String>,
    /// Truncation level of the mean-field law [default: 500]
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Output directory [default: .]
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}
overlay!(ChaosArgs {
    agents_list,
    mu,
    runs,
    t_final,
    sample_dt,
    seed,
    init,
    n_max,
    out_dir
});

#[derive(Args, Deserialize, Debug, Default)]
#[serde(default, deny_unknown_fields)]
pub struct FitArgs {
    /// Trajectory CSV.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Window start [default: t_final / 10]
    #[arg(long)]
    pub t_min: Option<f64>,
    /// Window end [default: t_final]
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Write ln H against sqrt t with the fitted line.
    #[arg(long, value_name = "SVG")]
    pub plot: Option<PathBuf>,
}
overlay!(FitArgs {
    input,
    t_min,
    t_max,
    plot
});

#[derive(Args, Deserialize, Debug, Default)]
#[serde(default, deny_unknown_fields)]
pub struct OracleArgs {
    /// Number of agents, at most 6 [default: 3]
    #[arg(long)]
    pub agents: Option<usize>,
    /// Mean wealth, N*mu at most 8 [default: 1]
    #[arg(long)]
    pub mu: Option<u32>,
    /// Simulated runs [default: 100000]
    #[arg(long)]
    pub runs: Option<usize>,
    /// Comparison time [default: 50]
    #[arg(long)]
    pub t: Option<f64>,
    /// Long time for the uniformity check [default: 200]
    #[arg(long)]
    pub t_long: Option<f64>,
    /// Chi-square level [default: 0.01]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Base seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// all-equal, single-rich or custom [default: all-equal]
    #[arg(long)]
    pub init: Option<String>,
    /// Comma-separated dollars for --init custom.
    #[arg(long, value_delimiter = ',')]
    pub dollars: Option<Vec<u32>>,
}
overlay!(OracleArgs {
    agents,
    mu,
    runs,
    t,
    t_long,
    alpha,
    seed,
    init,
    dollars
});

#[derive(Args, Deserialize, Debug, Default)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeArgs {
    /// Snapshot CSV (t,n,p_n).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Truncation level of the laws in the file [default: 500]
    #[arg(long)]
    pub n_max: Option<usize>,
    /// K of the exponential moment and the t* test [default: 1.05]
    #[arg(long)]
    pub k: Option<f64>,
    /// Split index m0 [default: median]
    #[arg(long)]
    pub split: Option<usize>,
    /// Diagnostics CSV path, '-' for stdout [default: -]
    #[arg(long)]
    pub out: Option<PathBuf>,
}
overlay!(AnalyzeArgs {
    input,
    n_max,
    k,
    split,
    out
});

/// Raised when the oracle comparison fails.
#[derive(Debug)]
pub struct OracleMismatch;

impl std::fmt::Display for OracleMismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("simulator disagrees with the exact generator")
    }
}

impl std::error::Error for OracleMismatch {}

fn load<T: for<'de> Deserialize<'de> + Default>(path: Option<&Path>) -> anyhow::Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

fn merged<T: Overlay + for<'de> Deserialize<'de> + Default>(
    flags: T,
    config: Option<&Path>,
) -> anyhow::Result<T> {
    Ok(flags.overlay(load(config)?))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = cli.config.as_deref();
    match cli.command {
        Command::Ode(a) => commands::ode(merged(a, cfg)?),
        Command::Simulate(a) => commands::simulate(merged(a, cfg)?),
        Command::Chaos(a) => commands::chaos(merged(a, cfg)?),
        Command::Fit(a) => commands::fit(merged(a, cfg)?),
        Command::Oracle(a) => commands::oracle(merged(a, cfg)?),
        Command::Analyze(a) => commands::analyze(merged(a, cfg)?),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<OracleMismatch>().is_some() {
        return 4;
    }
    let numerical = err
        .chain()
        .filter_map(|e| e.downcast_ref::<exk_core::Error>())
        .any(exk_core::Error::is_numerical);
    if numerical {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
