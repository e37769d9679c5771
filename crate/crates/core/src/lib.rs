//! Simulation and entropy analysis of the unbiased money-exchange model.
//!
//! `N` agents hold integer dollar amounts; every agent with at least one
//! dollar gives one dollar to a uniformly chosen other agent at rate
//! `lambda (N - 1) / N`. As `N` grows the law of a typical agent follows a
//! nonlinear ODE that relaxes to the geometric law with the same mean.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chaos;
pub mod dist;
pub mod entropy;
pub mod error;
pub mod io;
pub mod mean_field;
pub mod sim;

pub use dist::{
    empirical_to_dense, geometric_equilibrium, l1_distance, l1_distance_empirical, moments,
    AgentState, EmpiricalMeasure, ModelParams, Moments, ProbabilityVector, DEFAULT_N_MAX,
};
pub use error::{Error, Result};
pub use mean_field::{
    init_dirac, init_two_point, integrate, integrate_datum, ode_rhs, rk4_step, Boundary,
    InitialDatum, OdeConfig, Trajectory,
};
