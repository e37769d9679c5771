//! Exact continuous-time simulation of the N-agent exchange chain, its
//! generator, a small-N exact oracle and seeded ensembles.

mod ensemble;
mod exact;
mod generator;
mod state;

pub use ensemble::{
    run_ensemble, run_map, run_seed, run_snapshots, with_thread_pool, EnsembleConfig,
    EnsembleStats, Observable, Summary, THREADS_ENV,
};
pub use exact::{
    exact_generator_small, validate_small_n, ExactGenerator, OracleReport, MAX_AGENTS, MAX_DOLLARS,
    MAX_STATES,
};
pub use generator::{apply_generator, generator_phi_k};
pub use state::{new_simulation, AgentInit, Event, SimState, Step};
