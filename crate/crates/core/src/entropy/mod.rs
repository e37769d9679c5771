//! Entropy and dissipation functionals, inequality diagnostics, the
//! interpolated equilibrium with its Muckenhoupt-type constants, and the
//! stretched-exponential decay fit.

mod diagnostics;
mod fit;
mod functionals;
mod lsi;

pub use diagnostics::{
    detect_t_star, diagnose, eed_ratios, pillar_from, pillar_ratio, summarize, DiagnosticRow,
    DiagnosticSummary, DiagnosticsConfig, EedRatios, PillarRatio,
};
pub use fit::{default_window, fit_sqrt_decay, DecayFit};
pub use functionals::{
    dissipation, dissipation_terms, entropy, exp_moment, kl_divergence, modified_dissipation,
    tilde_of, truncated_log, DissipationReport, ExpMoment, FRONT_MASS_TOLERANCE,
};
pub use lsi::{
    active_range, interpolated_equilibrium, interpolated_equilibrium_split, median_index, psi,
    psi_inverse, InterpolationReport,
};
