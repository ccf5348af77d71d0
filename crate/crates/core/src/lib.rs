//! Stochastic gradient descent on adaptively generated Markovian data.
//!
//! The data stream is a Markov chain whose transition law depends on the
//! current decision vector, so samples are non-stationary and
//! decision-dependent; the gradient estimators are unbiased only under each
//! decision's stationary distribution. This crate provides:
//!
//! - [`sgd`]: the projected SGD driver with batching, deterministic seeded
//!   replication, and step-size-weighted iterate averaging;
//! - [`env`]: three environments behind one trait and a name-keyed registry
//!   (stock-out-damped inventory, M/M/1 pricing/capacity sizing, tabular
//!   actor-critic), each with a pathwise gradient estimator;
//! - [`oracles`]: independent ground truth (exact MDP solvers, closed-form
//!   and Monte-Carlo stationary losses, rate fitting);
//! - [`harness`]: the experiment runner with presets, CSV and SVG output;
//! - [`checks`]: the statistical property suite tying samplers to oracles.

pub mod checks;
pub mod env;
pub mod harness;
pub mod oracles;
pub mod sgd;

pub use env::{build_env_spec, registry, AdaptiveEnvironment, EnvSpec, LossOracle};
pub use sgd::{
    project, run_sgd, sgd_update, step_size, BoxProjection, GradientSample, RunConfig, RunRecord,
    ScheduleFamily, StepSchedule, ThetaVector,
};
