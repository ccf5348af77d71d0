//! Single-product inventory chain with stock-out-damped AR(1) demand.
//!
//! Demand follows `D' = (alpha * min(D + u, theta) + (1 - alpha) * m + eps)^+`:
//! whenever demand would exceed the base-stock level `theta`, the carried-over
//! component is capped at `theta`, which damps future demand. The chain is
//! augmented with the pathwise derivative `L = dD/dtheta`, which obeys its own
//! one-step recursion, and the per-period overage/underage cost gradient
//! estimator `(h 1{D < theta} - b 1{D >= theta}) (1 - L)` is unbiased under
//! the stationary law of `(D, L)` at fixed `theta`.
//!
//! The loss oracle tabulates the stationary cost on a `theta` grid by common
//! random numbers, so gap evaluations near the optimum are differences on a
//! single smooth error surface rather than independent noisy estimates.

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{
    standard_normal, AdaptiveEnvironment, BuildError, EnvError, EnvSpec, LossOracle,
    OracleContext, OracleError,
};
use crate::oracles::mc::{tabulate_stationary_loss, InventoryLossTable};
use crate::sgd::{BoxProjection, GradientSample, ThetaVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InventoryParams {
    /// AR(1) coefficient, in (0, 1).
    pub alpha: f64,
    /// Demand drift.
    pub m: f64,
    /// Standard deviation of both noise terms.
    pub sigma: f64,
    /// Overage (holding) cost per unit.
    pub h: f64,
    /// Underage (backlog) cost per unit.
    pub b: f64,
    /// Upper end of the feasible base-stock interval `[0, theta_max]`.
    pub theta_max: f64,
}

impl Default for InventoryParams {
    fn default() -> Self {
        InventoryParams { alpha: 0.8, m: 5.0, sigma: 1.0, h: 1.0, b: 10.0, theta_max: 20.0 }
    }
}

impl InventoryParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(format!("alpha must lie in (0,1), got {}", self.alpha));
        }
        if self.sigma <= 0.0 || self.h <= 0.0 || self.b <= 0.0 || self.theta_max <= 0.0 {
            return Err("sigma, h, b, theta_max must be positive".into());
        }
        if self.m < 0.0 {
            return Err(format!("demand drift must be nonnegative, got {}", self.m));
        }
        Ok(())
    }
}

/// Demand level and its pathwise derivative with respect to the base-stock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InventoryState {
    pub d: f64,
    pub l: f64,
}

impl InventoryState {
    /// The recurrent atom `(0, 0)`; deterministic start keeps replications
    /// comparable.
    pub fn initial() -> Self {
        InventoryState { d: 0.0, l: 0.0 }
    }
}

/// One demand transition together with the derivative recursion.
///
/// Ties `D + u = theta` resolve to the non-stock-out branch; under Gaussian
/// noise this is a measure-zero event.
pub fn inventory_transition(
    state: InventoryState,
    theta: f64,
    params: &InventoryParams,
    noise: (f64, f64),
) -> InventoryState {
    let (u, eps) = noise;
    let stocked_out = state.d + u > theta;
    let carried = if stocked_out { theta } else { state.d + u };
    let d_next = (params.alpha * carried + (1.0 - params.alpha) * params.m + eps).max(0.0);
    let l_next = if d_next > 0.0 {
        params.alpha * (if stocked_out { 1.0 } else { state.l })
    } else {
        0.0
    };
    debug_assert!((0.0..=params.alpha.max(state.l)).contains(&l_next));
    InventoryState { d: d_next, l: l_next }
}

/// Base-stock gradient estimate at the current augmented state.
pub fn inventory_gradient(state: &InventoryState, theta: f64, params: &InventoryParams) -> f64 {
    let cost_sign = if state.d < theta { params.h } else { -params.b };
    cost_sign * (1.0 - state.l)
}

/// Per-period overage/underage cost.
pub fn inventory_loss(d: f64, theta: f64, params: &InventoryParams) -> f64 {
    params.h * (theta - d).max(0.0) + params.b * (d - theta).max(0.0)
}

pub struct InventoryEnv {
    params: InventoryParams,
    state: InventoryState,
}

impl InventoryEnv {
    pub fn new(params: InventoryParams) -> Self {
        InventoryEnv { params, state: InventoryState::initial() }
    }

    pub fn state(&self) -> InventoryState {
        self.state
    }
}

impl AdaptiveEnvironment for InventoryEnv {
    fn dim(&self) -> usize {
        1
    }

    fn theta0(&self) -> ThetaVector {
        ThetaVector(vec![self.params.theta_max / 2.0])
    }

    fn reset(&mut self, _rng: &mut rand_chacha::ChaCha8Rng) {
        self.state = InventoryState::initial();
    }

    fn advance(
        &mut self,
        theta: &ThetaVector,
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> Result<(), EnvError> {
        let u = self.params.sigma * standard_normal(rng);
        let eps = self.params.sigma * standard_normal(rng);
        self.state = inventory_transition(self.state, theta.0[0], &self.params, (u, eps));
        Ok(())
    }

    fn estimate_gradient(&self, theta: &ThetaVector) -> Result<GradientSample, EnvError> {
        Ok(GradientSample(vec![inventory_gradient(
            &self.state,
            theta.0[0],
            &self.params,
        )]))
    }
}

/// Spec + tabulated-oracle holder selected via the registry name `inventory`.
pub struct InventorySpec {
    params: InventoryParams,
    table: OnceLock<Arc<InventoryLossTable>>,
}

impl InventorySpec {
    pub fn new(params: InventoryParams) -> Self {
        InventorySpec { params, table: OnceLock::new() }
    }

    pub fn params(&self) -> &InventoryParams {
        &self.params
    }

    pub fn loss_table(&self) -> Option<Arc<InventoryLossTable>> {
        self.table.get().cloned()
    }
}

pub fn build_spec(params: &Value) -> Result<Box<dyn EnvSpec>, BuildError> {
    let parsed: InventoryParams = serde_json::from_value(params.clone())
        .map_err(|source| BuildError::BadParams { name: "inventory", source })?;
    Ok(Box::new(InventorySpec::new(parsed)))
}

struct TableOracle {
    table: Arc<InventoryLossTable>,
}

impl LossOracle for TableOracle {
    fn gap(&self, theta: &ThetaVector) -> Option<f64> {
        Some(self.table.gap(theta.0[0]))
    }

    fn optimum(&self) -> (ThetaVector, f64) {
        (ThetaVector(vec![self.table.theta_star]), self.table.loss_star)
    }
}

impl EnvSpec for InventorySpec {
    fn name(&self) -> &'static str {
        "inventory"
    }

    fn dim(&self) -> usize {
        1
    }

    fn theta0(&self) -> ThetaVector {
        ThetaVector(vec![self.params.theta_max / 2.0])
    }

    fn default_projection(&self) -> Option<BoxProjection> {
        Some(BoxProjection::new(vec![0.0], vec![self.params.theta_max]))
    }

    fn prepare(&self, ctx: &OracleContext) -> Result<(), OracleError> {
        if self.table.get().is_some() {
            return Ok(());
        }
        self.params.validate().map_err(OracleError::Other)?;
        let table = tabulate_stationary_loss(&self.params, ctx)?;
        let _ = self.table.set(Arc::new(table));
        Ok(())
    }

    fn replication(&self, _rep: u32) -> (Box<dyn AdaptiveEnvironment>, Arc<dyn LossOracle>) {
        let table = self
            .table
            .get()
            .expect("prepare() must run before replication()")
            .clone();
        (
            Box::new(InventoryEnv::new(self.params)),
            Arc::new(TableOracle { table }),
        )
    }

    fn optimum_report(&self) -> String {
        match self.table.get() {
            Some(t) => format!(
                "inventory: theta* = {:.4}, loss* = {:.6} (grid step {}, CRN tabulation)",
                t.theta_star, t.loss_star, t.grid_step
            ),
            None => "inventory: oracle not prepared".into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> InventoryParams {
        InventoryParams { alpha: 0.8, m: 5.0, sigma: 1.0, h: 1.0, b: 10.0, theta_max: 20.0 }
    }

    #[test]
    fn transition_no_stockout() {
        // D + u below theta: carry-over keeps its derivative weight.
        let s = inventory_transition(
            InventoryState { d: 0.0, l: 0.0 },
            10.0,
            &params(),
            (0.0, 0.0),
        );
        assert_eq!(s.d, 1.0);
        assert_eq!(s.l, 0.0);
    }

    #[test]
    fn transition_stockout_branch() {
        let s = inventory_transition(
            InventoryState { d: 20.0, l: 0.0 },
            10.0,
            &params(),
            (0.0, 0.0),
        );
        assert!((s.d - 9.0).abs() < 1e-12);
        assert!((s.l - 0.8).abs() < 1e-12);
    }

    #[test]
    fn censoring_kills_derivative() {
        let s = inventory_transition(
            InventoryState { d: 1.0, l: 0.5 },
            10.0,
            &params(),
            (0.0, -10.0),
        );
        assert_eq!(s.d, 0.0);
        assert_eq!(s.l, 0.0);
    }

    #[test]
    fn gradient_branches() {
        let p = params();
        let overage = inventory_gradient(&InventoryState { d: 3.0, l: 0.0 }, 5.0, &p);
        assert_eq!(overage, 1.0);
        let underage = inventory_gradient(&InventoryState { d: 7.0, l: 0.0 }, 5.0, &p);
        assert_eq!(underage, -10.0);
        let damped = inventory_gradient(&InventoryState { d: 7.0, l: 0.8 }, 5.0, &p);
        assert!((damped - (-2.0)).abs() < 1e-12);
    }

    #[test]
    fn loss_examples() {
        let p = params();
        assert_eq!(inventory_loss(3.0, 5.0, &p), 2.0);
        assert_eq!(inventory_loss(5.0, 5.0, &p), 0.0);
        assert_eq!(inventory_loss(7.0, 5.0, &p), 20.0);
    }

    #[test]
    fn derivative_stays_in_unit_alpha_band() {
        use rand_chacha::rand_core::SeedableRng;
        let p = params();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut s = InventoryState::initial();
        for _ in 0..20_000 {
            let u = p.sigma * standard_normal(&mut rng);
            let e = p.sigma * standard_normal(&mut rng);
            s = inventory_transition(s, 6.0, &p, (u, e));
            assert!(s.d >= 0.0);
            assert!(s.l >= 0.0 && s.l <= p.alpha);
        }
    }

    #[test]
    fn renewal_coupling_from_two_starts() {
        use rand_chacha::rand_core::SeedableRng;
        let p = params();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut a = InventoryState { d: 0.0, l: 0.0 };
        let mut b = InventoryState { d: 15.0, l: 0.8 };
        let mut coupled_at: Option<usize> = None;
        for t in 0..50_000 {
            let u = p.sigma * standard_normal(&mut rng);
            let e = p.sigma * standard_normal(&mut rng);
            a = inventory_transition(a, 6.0, &p, (u, e));
            b = inventory_transition(b, 6.0, &p, (u, e));
            match coupled_at {
                Some(_) => assert_eq!(a, b, "states must agree forever after coupling"),
                None => {
                    if a.d == 0.0 && b.d == 0.0 {
                        coupled_at = Some(t);
                    }
                }
            }
        }
        assert!(coupled_at.is_some(), "chains never met at the empty state");
    }

    #[test]
    fn bad_params_rejected() {
        let mut p = params();
        p.alpha = 1.5;
        assert!(p.validate().is_err());
        let err = build_spec(&serde_json::json!({"alpha": "x"}));
        assert!(err.is_err());
    }
}
