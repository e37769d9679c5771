use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("not a probability vector: {0}")]
    InvalidDistribution(String),

    #[error("geometric tail mass {tail:.3e} beyond n_max={n_max} exceeds 1e-12 (mu={mu})")]
    TailTooHeavy { mu: u32, n_max: usize, tail: f64 },

    #[error("agent holds {level} dollars, above truncation level n_max={n_max}")]
    LevelOverflow { level: usize, n_max: usize },

    #[error(
        "entry {index} became {value:.3e} (below -1e-12); time step too large or truncation failed"
    )]
    NegativeProbability { index: usize, value: f64 },

    #[error("mass defect {defect:.3e} at t={t} exceeds 1e-6")]
    MassLeak { t: f64, defect: f64 },

    #[error("initial dollars sum to {got}, expected N*mu = {expected}")]
    BadInitialSum { got: u64, expected: u64 },

    #[error("state space has {states} states (limit {limit}); exact generator needs N <= 6 and N*mu <= 8")]
    StateSpaceTooLarge { states: u128, limit: usize },

    #[error("entry p_{index} = 0; strictly positive law required")]
    PositivityRequired { index: usize },

    #[error("weight nu_{index} vanishes on the active range")]
    DegenerateWeights { index: usize },

    #[error("need at least {needed} samples inside the fit window, found {found}")]
    InsufficientData { needed: usize, found: usize },

    #[error("entropy sample H={value} at t={t} is not positive")]
    NonPositiveEntropy { t: f64, value: f64 },

    #[error("argument {0} outside the domain (x must be > 0)")]
    Domain(f64),

    #[error("snapshot time {0} is not a trajectory sample time")]
    TimeMismatch(f64),

    #[error("ensemble initial law does not match the trajectory initial datum: {0}")]
    InitMismatch(String),

    #[error("run {run} (seed {seed:#018x}) failed: {source}")]
    RunFailed {
        run: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NegativeProbability { .. }
            | Error::MassLeak { .. }
            | Error::PositivityRequired { .. }
            | Error::DegenerateWeights { .. }
            | Error::NonPositiveEntropy { .. } => true,
            Error::RunFailed { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
