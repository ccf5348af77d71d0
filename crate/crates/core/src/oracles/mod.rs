//! Independent ground-truth computations the experiment suite compares
//! against: exact MDP solvers, closed-form and Monte-Carlo stationary
//! losses, derivative-free optimizers for the loss anchors, and log-log
//! rate fitting.

pub mod cache;
pub mod mc;
pub mod mdp;
pub mod optimize;
pub mod rates;

pub use mc::{mc_stationary_loss, tabulate_stationary_loss, InventoryLossTable};
pub use mdp::{
    bellman_sweep, exact_pg_gradient, occupancy_series, occupancy_solve, optimal_loss,
    policy_eval_linear, policy_loss, stationary_pg_gradient, value_iteration, EvalTarget,
};
pub use optimize::{grid_optimum_1d, grid_optimum_2d, Domain2, Optimum};
pub use rates::{default_fit_window, fit_rate, LossCurve, RateError, RateFit};
