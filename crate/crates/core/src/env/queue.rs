//! Single-server FIFO queue with price-controlled arrivals and a sized
//! service rate.
//!
//! The decision is `theta = (mu, p)`: service rate and price. Arrivals form
//! a Poisson process with rate `lambda(p) = n * logistic(a - p)`; per-arrival
//! waiting times follow the Lindley recursion, augmented with the server busy
//! time `X` seen by each arrival (reset when the system empties). `(W, X)`
//! carries exactly the information the pathwise gradient of the steady-state
//! objective needs.
//!
//! With exponential baseline service and interarrival draws the steady-state
//! objective has a closed form, which anchors every loss-gap curve.

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{
    standard_exponential, AdaptiveEnvironment, BuildError, EnvError, EnvSpec, LossOracle,
    OracleContext, OracleError,
};
use crate::oracles::cache::OracleCache;
use crate::oracles::optimize::{grid_optimum_2d, Domain2};
use crate::sgd::{BoxProjection, GradientSample, ThetaVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QueueParams {
    /// Market size: `lambda(p) = n * logistic(a - p)`.
    pub n: f64,
    /// Demand location parameter.
    pub a: f64,
    /// Quadratic capacity cost coefficient, `c(mu) = c0 * mu^2`.
    pub c0: f64,
    /// Holding cost rate.
    pub h0: f64,
    pub mu_low: f64,
    pub mu_high: f64,
    pub p_low: f64,
    pub p_high: f64,
    /// Test hook: evaluate the gradient as if `lambda'(p) = 0`.
    pub frozen_demand: bool,
}

impl Default for QueueParams {
    fn default() -> Self {
        QueueParams {
            n: 10.0,
            a: 4.1,
            c0: 0.1,
            h0: 1.0,
            mu_low: 3.0,
            mu_high: 12.0,
            p_low: 2.0,
            p_high: 8.0,
            frozen_demand: false,
        }
    }
}

impl QueueParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.n <= 0.0 || self.c0 <= 0.0 || self.h0 <= 0.0 {
            return Err("n, c0, h0 must be positive".into());
        }
        if !(self.mu_low < self.mu_high && self.p_low < self.p_high) || self.mu_low <= 0.0 {
            return Err("need 0 < mu_low < mu_high and p_low < p_high".into());
        }
        Ok(())
    }

    /// Whether the queue is stable everywhere in the feasible box
    /// (worst case: lowest price, lowest service rate).
    pub fn uniformly_stable(&self) -> bool {
        demand_rate(self.p_low, self) < self.mu_low
    }
}

/// Waiting time of the current arrival and the server busy time it observed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueState {
    pub w: f64,
    pub x: f64,
}

impl QueueState {
    /// Empty system, the chain's recurrent atom.
    pub fn initial() -> Self {
        QueueState { w: 0.0, x: 0.0 }
    }
}

/// Arrival rate `n * exp(a - p) / (1 + exp(a - p))`, strictly decreasing in
/// the price.
pub fn demand_rate(p: f64, params: &QueueParams) -> f64 {
    params.n / (1.0 + (p - params.a).exp())
}

/// `d lambda / d p`, analytic logistic derivative (zero under the
/// frozen-demand hook).
pub fn demand_rate_derivative(p: f64, params: &QueueParams) -> f64 {
    if params.frozen_demand {
        return 0.0;
    }
    let l0 = 1.0 / (1.0 + (p - params.a).exp());
    -params.n * l0 * (1.0 - l0)
}

/// Distribution of the baseline service/interarrival pair `(S, T)`. The
/// dynamics are written against this so other light-tailed laws could be
/// plugged in; only the exponential pair is shipped.
pub trait ServiceArrivalSampler: Send + Sync {
    fn sample(&self, rng: &mut rand_chacha::ChaCha8Rng) -> (f64, f64);
}

/// `S, T ~ Exp(1)` i.i.d.: the M/M/1 case.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExpExpSampler;

impl ServiceArrivalSampler for ExpExpSampler {
    fn sample(&self, rng: &mut rand_chacha::ChaCha8Rng) -> (f64, f64) {
        (standard_exponential(rng), standard_exponential(rng))
    }
}

/// Lindley step plus the busy-time recursion. One fresh interarrival draw
/// feeds both updates.
pub fn queue_transition(
    state: QueueState,
    mu: f64,
    p: f64,
    params: &QueueParams,
    noise: (f64, f64),
) -> QueueState {
    let (s, t) = noise;
    let interarrival = t / demand_rate(p, params);
    let w_next = (state.w + s / mu - interarrival).max(0.0);
    let x_next = if w_next > 0.0 { state.x + interarrival } else { 0.0 };
    // Emptying must reset the busy clock.
    assert!(w_next > 0.0 || x_next == 0.0);
    QueueState { w: w_next, x: x_next }
}

/// Pathwise gradient estimate `(d/dmu, d/dp)` of the steady-state objective
/// at the current `(W, X)`.
///
/// Unrolling the Lindley recursion over the current busy period gives
/// `dW/dmu = -(W + X)/mu` and `dW/dp = (lambda'/lambda) X`; substituting
/// into the objective `h0 lambda (E[W] + 1/mu) + c(mu) - p lambda` yields
/// a congestion term carrying `lambda(p)` in the capacity component and
/// `lambda'(p)` in the price component.
pub fn queue_gradient(
    state: &QueueState,
    mu: f64,
    p: f64,
    params: &QueueParams,
) -> Result<[f64; 2], EnvError> {
    if mu <= 0.0 {
        return Err(EnvError::NonPositiveServiceRate(mu));
    }
    let lambda = demand_rate(p, params);
    let dlambda = demand_rate_derivative(p, params);
    let congestion = state.w + state.x + 1.0 / mu;
    let g_mu = 2.0 * params.c0 * mu - params.h0 * (lambda / mu) * congestion;
    let g_p = -lambda - p * dlambda + params.h0 * dlambda * congestion;
    Ok([g_mu, g_p])
}

/// Exact steady-state objective of the exponential model, as a minimization:
/// `-(n p lambda0(p) - c0 mu^2 - h0 rho / (1 - rho))` with `rho = lambda/mu`.
pub fn mm1_loss(mu: f64, p: f64, params: &QueueParams) -> Result<f64, EnvError> {
    let lambda = demand_rate(p, params);
    if mu <= 0.0 {
        return Err(EnvError::NonPositiveServiceRate(mu));
    }
    if lambda >= mu {
        return Err(EnvError::Invalid(format!(
            "unstable configuration: lambda({p:.4}) = {lambda:.4} >= mu = {mu:.4}"
        )));
    }
    let rho = lambda / mu;
    Ok(-(p * lambda - params.c0 * mu * mu - params.h0 * rho / (1.0 - rho)))
}

/// Analytic gradient of [`mm1_loss`].
pub fn mm1_loss_gradient(mu: f64, p: f64, params: &QueueParams) -> Result<[f64; 2], EnvError> {
    let lambda = demand_rate(p, params);
    if mu <= 0.0 {
        return Err(EnvError::NonPositiveServiceRate(mu));
    }
    if lambda >= mu {
        return Err(EnvError::Invalid("unstable configuration".into()));
    }
    let dlambda = demand_rate_derivative(p, params);
    let slack = mu - lambda;
    let d_mu = 2.0 * params.c0 * mu - params.h0 * lambda / (slack * slack);
    let d_p = -lambda - p * dlambda + params.h0 * dlambda * mu / (slack * slack);
    Ok([d_mu, d_p])
}

/// Mean stationary waiting time `lambda / (mu (mu - lambda))` of the M/M/1
/// queue, used as an independent cross-check on the simulator.
pub fn mm1_wait_mean(mu: f64, lambda: f64) -> f64 {
    assert!(lambda < mu && mu > 0.0);
    lambda / (mu * (mu - lambda))
}

pub struct QueueEnv {
    params: QueueParams,
    sampler: Arc<dyn ServiceArrivalSampler>,
    state: QueueState,
}

impl QueueEnv {
    pub fn new(params: QueueParams) -> Self {
        QueueEnv::with_sampler(params, Arc::new(ExpExpSampler))
    }

    pub fn with_sampler(params: QueueParams, sampler: Arc<dyn ServiceArrivalSampler>) -> Self {
        QueueEnv { params, sampler, state: QueueState::initial() }
    }

    pub fn state(&self) -> QueueState {
        self.state
    }
}

impl AdaptiveEnvironment for QueueEnv {
    fn dim(&self) -> usize {
        2
    }

    fn theta0(&self) -> ThetaVector {
        ThetaVector(vec![
            0.5 * (self.params.mu_low + self.params.mu_high),
            0.5 * (self.params.p_low + self.params.p_high),
        ])
    }

    fn reset(&mut self, _rng: &mut rand_chacha::ChaCha8Rng) {
        self.state = QueueState::initial();
    }

    fn advance(
        &mut self,
        theta: &ThetaVector,
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> Result<(), EnvError> {
        let (mu, p) = (theta.0[0], theta.0[1]);
        if mu <= 0.0 {
            return Err(EnvError::NonPositiveServiceRate(mu));
        }
        let noise = self.sampler.sample(rng);
        self.state = queue_transition(self.state, mu, p, &self.params, noise);
        Ok(())
    }

    fn estimate_gradient(&self, theta: &ThetaVector) -> Result<GradientSample, EnvError> {
        let g = queue_gradient(&self.state, theta.0[0], theta.0[1], &self.params)?;
        Ok(GradientSample(g.to_vec()))
    }

    fn theta_valid(&self, theta: &ThetaVector) -> bool {
        theta.is_finite() && theta.0[0] > 1e-9
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct QueueOptimum {
    mu_star: f64,
    p_star: f64,
    loss_star: f64,
}

/// Spec + closed-form oracle selected via the registry name `queue`.
pub struct QueueSpec {
    params: QueueParams,
    optimum: OnceLock<QueueOptimum>,
}

impl QueueSpec {
    pub fn new(params: QueueParams) -> Self {
        QueueSpec { params, optimum: OnceLock::new() }
    }

    pub fn params(&self) -> &QueueParams {
        &self.params
    }
}

pub fn build_spec(params: &Value) -> Result<Box<dyn EnvSpec>, BuildError> {
    let parsed: QueueParams = serde_json::from_value(params.clone())
        .map_err(|source| BuildError::BadParams { name: "queue", source })?;
    Ok(Box::new(QueueSpec::new(parsed)))
}

struct ClosedFormOracle {
    params: QueueParams,
    optimum: QueueOptimum,
}

impl LossOracle for ClosedFormOracle {
    fn gap(&self, theta: &ThetaVector) -> Option<f64> {
        mm1_loss(theta.0[0], theta.0[1], &self.params)
            .ok()
            .map(|l| (l - self.optimum.loss_star).max(0.0))
    }

    fn optimum(&self) -> (ThetaVector, f64) {
        (
            ThetaVector(vec![self.optimum.mu_star, self.optimum.p_star]),
            self.optimum.loss_star,
        )
    }
}

impl EnvSpec for QueueSpec {
    fn name(&self) -> &'static str {
        "queue"
    }

    fn dim(&self) -> usize {
        2
    }

    fn theta0(&self) -> ThetaVector {
        ThetaVector(vec![
            0.5 * (self.params.mu_low + self.params.mu_high),
            0.5 * (self.params.p_low + self.params.p_high),
        ])
    }

    fn default_projection(&self) -> Option<BoxProjection> {
        Some(BoxProjection::new(
            vec![self.params.mu_low, self.params.p_low],
            vec![self.params.mu_high, self.params.p_high],
        ))
    }

    fn prepare(&self, ctx: &OracleContext) -> Result<(), OracleError> {
        if self.optimum.get().is_some() {
            return Ok(());
        }
        self.params.validate().map_err(OracleError::Other)?;

        let cache = OracleCache::new(ctx.cache_dir.clone());
        let key = cache.key("queue-optimum", &self.params);
        if let Some(opt) = cache.load::<QueueOptimum>(&key) {
            let _ = self.optimum.set(opt);
            return Ok(());
        }

        let params = self.params;
        let domain = Domain2 {
            lower: [params.mu_low, params.p_low],
            upper: [params.mu_high, params.p_high],
        };
        // Unstable configurations scan as +inf and are never selected.
        let result = grid_optimum_2d(
            |x| mm1_loss(x[0], x[1], &params).unwrap_or(f64::INFINITY),
            &domain,
            0.02,
            ctx.allow_boundary,
        )?;
        let opt = QueueOptimum {
            mu_star: result.argmin[0],
            p_star: result.argmin[1],
            loss_star: result.min,
        };
        cache.store(&key, &opt);
        let _ = self.optimum.set(opt);
        Ok(())
    }

    fn replication(&self, _rep: u32) -> (Box<dyn AdaptiveEnvironment>, Arc<dyn LossOracle>) {
        let optimum = *self
            .optimum
            .get()
            .expect("prepare() must run before replication()");
        (
            Box::new(QueueEnv::new(self.params)),
            Arc::new(ClosedFormOracle { params: self.params, optimum }),
        )
    }

    fn optimum_report(&self) -> String {
        match self.optimum.get() {
            Some(o) => format!(
                "queue: (mu*, p*) = ({:.6}, {:.6}), loss* = {:.6}{}",
                o.mu_star,
                o.p_star,
                o.loss_star,
                if self.params.uniformly_stable() {
                    ""
                } else {
                    " [box not uniformly stable: lambda(p_low) >= mu_low]"
                }
            ),
            None => "queue: oracle not prepared".into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> QueueParams {
        QueueParams::default()
    }

    #[test]
    fn demand_rate_logistic_midpoint() {
        let p = params();
        assert!((demand_rate(p.a, &p) - 5.0).abs() < 1e-12);
        assert!((demand_rate(4.1, &p) - 5.0).abs() < 1e-12);
        // Monotone vanishing tail.
        assert!(demand_rate(p.a + 40.0, &p) < 1e-16 * p.n);
        assert!(demand_rate(3.0, &p) > demand_rate(4.0, &p));
    }

    #[test]
    fn transition_examples() {
        let p = params();
        // lambda is recovered from the price; pick p so lambda = 1.
        let price_for_lambda_1 = p.a + (p.n - 1.0f64).ln();
        assert!((demand_rate(price_for_lambda_1, &p) - 1.0).abs() < 1e-12);

        let s = queue_transition(
            QueueState { w: 1.0, x: 0.0 },
            2.0,
            price_for_lambda_1,
            &p,
            (2.0, 1.0),
        );
        assert!((s.w - 1.0).abs() < 1e-12);
        assert!((s.x - 1.0).abs() < 1e-12);

        let s = queue_transition(
            QueueState { w: 0.5, x: 2.0 },
            1.0,
            price_for_lambda_1,
            &p,
            (0.0, 10.0),
        );
        assert_eq!(s.w, 0.0);
        assert_eq!(s.x, 0.0);

        let price_for_lambda_half = p.a + (2.0 * p.n - 1.0f64).ln();
        let s = queue_transition(
            QueueState { w: 0.0, x: 0.0 },
            1.0,
            price_for_lambda_half,
            &p,
            (1.0, 1.0),
        );
        assert_eq!(s.w, 0.0);
        assert_eq!(s.x, 0.0);
    }

    #[test]
    fn gradient_holding_term_vanishes_at_empty_state() {
        let mut p = params();
        p.h0 = 0.0;
        // validate() rejects h0 = 0, but the gradient formula itself is total.
        let g = queue_gradient(&QueueState { w: 0.0, x: 0.0 }, 2.0, 5.0, &p).unwrap();
        assert!((g[0] - 0.4).abs() < 1e-12);
        let lambda = demand_rate(5.0, &p);
        let dlambda = demand_rate_derivative(5.0, &p);
        assert!((g[1] - (-lambda - 5.0 * dlambda)).abs() < 1e-12);
    }

    #[test]
    fn frozen_demand_hook() {
        let mut p = params();
        p.frozen_demand = true;
        let g = queue_gradient(&QueueState { w: 1.0, x: 2.0 }, 4.0, 5.0, &p).unwrap();
        let lambda = demand_rate(5.0, &p);
        assert_eq!(g[1], -lambda);
        let congestion = 1.0 + 2.0 + 0.25;
        assert!((g[0] - (2.0 * p.c0 * 4.0 - p.h0 * lambda / 4.0 * congestion)).abs() < 1e-12);
    }

    #[test]
    fn gradient_rejects_nonpositive_mu() {
        let p = params();
        assert!(queue_gradient(&QueueState::initial(), 0.0, 5.0, &p).is_err());
        assert!(queue_gradient(&QueueState::initial(), -1.0, 5.0, &p).is_err());
    }

    #[test]
    fn loss_limits() {
        let p = params();
        // Tiny arrival rate: holding term vanishes, capacity cost remains.
        let far_price = p.a + (1e9f64).ln();
        let l = mm1_loss(1.0, far_price, &p).unwrap();
        assert!((l - p.c0).abs() < 1e-6);

        // Near instability the holding term dominates but stays finite.
        let lambda = demand_rate(4.0, &p);
        let l = mm1_loss(lambda * 1.0001, 4.0, &p).unwrap();
        assert!(l.is_finite());
        assert!(l > 0.5e4 * p.h0 * 0.9);

        assert!(mm1_loss(3.0, 2.0, &p).is_err(), "lambda(2) > 3 must be unstable");
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let p = params();
        for &(mu, price) in &[(6.0, 5.0), (8.0, 4.0), (10.0, 3.5)] {
            let g = mm1_loss_gradient(mu, price, &p).unwrap();
            let d = 1e-6;
            let fd_mu = (mm1_loss(mu + d, price, &p).unwrap()
                - mm1_loss(mu - d, price, &p).unwrap())
                / (2.0 * d);
            let fd_p = (mm1_loss(mu, price + d, &p).unwrap()
                - mm1_loss(mu, price - d, &p).unwrap())
                / (2.0 * d);
            assert!((g[0] - fd_mu).abs() < 1e-6, "d/dmu {} vs {}", g[0], fd_mu);
            assert!((g[1] - fd_p).abs() < 1e-6, "d/dp {} vs {}", g[1], fd_p);
        }
    }

    #[test]
    fn x_resets_whenever_system_empties() {
        use rand_chacha::rand_core::SeedableRng;
        let p = params();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut s = QueueState::initial();
        let sampler = ExpExpSampler;
        for _ in 0..50_000 {
            let noise = sampler.sample(&mut rng);
            s = queue_transition(s, 7.0, 4.5, &p, noise);
            assert!(s.w >= 0.0 && s.x >= 0.0);
            if s.w == 0.0 {
                assert_eq!(s.x, 0.0);
            }
        }
    }

    #[test]
    fn default_box_is_not_uniformly_stable() {
        // lambda(2) = 8.909 exceeds mu_low = 3; the projected dynamics still
        // self-correct, but the flag must report it.
        let p = params();
        assert!(!p.uniformly_stable());
        let mut tight = p;
        tight.p_low = 4.5;
        tight.mu_low = 4.5;
        assert!(tight.uniformly_stable());
    }
}
