//! Adaptive data environments and the name-keyed registry that selects one
//! at runtime.
//!
//! Each environment is a Markov chain whose transition law depends on the
//! current decision vector, together with a gradient estimator that is
//! unbiased under the chain's stationary distribution at a fixed decision.
//! They all sit behind [`AdaptiveEnvironment`] so the SGD driver and the
//! experiment harness are generic over them; [`registry`] maps the names
//! accepted in configs (`inventory`, `queue`, `rl`) to builders.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use crate::sgd::{BoxProjection, GradientSample, ThetaVector};

pub mod inventory;
pub mod queue;
pub mod rl;

/// Failure inside an environment transition or estimator evaluation.
#[derive(Debug, thiserror::Error)]
pub enum EnvError {
    #[error("service rate must be positive, got {0}")]
    NonPositiveServiceRate(f64),
    #[error("{0}")]
    Invalid(String),
}

/// A policy-controlled Markov chain plus its pathwise gradient estimator.
///
/// `advance` draws one data sample under the supplied decision (the decision
/// is held fixed across a batch by the driver); `estimate_gradient` evaluates
/// the estimator at the state reached by the latest transition.
pub trait AdaptiveEnvironment: Send {
    fn dim(&self) -> usize;

    /// Canonical starting decision for experiment runs.
    fn theta0(&self) -> ThetaVector;

    /// Restore the canonical initial chain state.
    fn reset(&mut self, rng: &mut ChaCha8Rng);

    fn advance(&mut self, theta: &ThetaVector, rng: &mut ChaCha8Rng) -> Result<(), EnvError>;

    fn estimate_gradient(&self, theta: &ThetaVector) -> Result<GradientSample, EnvError>;

    /// Whether an iterate is inside the region where the model makes sense.
    /// Unprojected runs that leave it are recorded as diverged.
    fn theta_valid(&self, theta: &ThetaVector) -> bool {
        theta.is_finite()
    }
}

/// Ground-truth loss access for gap curves: `gap` is the (possibly rescaled)
/// excess loss of a decision over the certified optimum, `None` where the
/// loss is undefined (e.g. an unstable queue configuration).
pub trait LossOracle: Send + Sync {
    fn gap(&self, theta: &ThetaVector) -> Option<f64>;

    fn optimum(&self) -> (ThetaVector, f64);
}

/// Where oracle computations may cache their results.
#[derive(Debug, Clone, Default)]
pub struct OracleContext {
    pub cache_dir: Option<std::path::PathBuf>,
    pub allow_boundary: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("optimum lies on the domain boundary: {0}")]
    BoundaryOptimum(String),
    #[error("cache i/o: {0}")]
    Cache(#[from] std::io::Error),
    #[error("{0}")]
    Other(String),
}

/// Immutable description of one environment family instance: parameters,
/// defaults, and per-replication construction of the chain and its oracle.
pub trait EnvSpec: Send + Sync {
    fn name(&self) -> &'static str;

    fn dim(&self) -> usize;

    fn theta0(&self) -> ThetaVector;

    fn default_projection(&self) -> Option<BoxProjection>;

    /// Compute (or load from cache) whatever the loss oracle needs. Must be
    /// called before `replication`.
    fn prepare(&self, ctx: &OracleContext) -> Result<(), OracleError>;

    /// Environment instance and loss oracle for replication `rep`.
    /// Replications own their state; the oracle is shared.
    fn replication(&self, rep: u32) -> (Box<dyn AdaptiveEnvironment>, Arc<dyn LossOracle>);

    /// Human-readable summary of the certified optimum.
    fn optimum_report(&self) -> String;
}

#[derive(Debug, thiserror::Error)]
pub enum BuildError {
    #[error("unknown environment `{0}` (known: inventory, queue, rl)")]
    UnknownEnvironment(String),
    #[error("invalid parameters for `{name}`: {source}")]
    BadParams {
        name: &'static str,
        #[source]
        source: serde_json::Error,
    },
}

/// One registry row: config name plus the builder that turns a JSON
/// parameter block into a spec trait object.
pub struct EnvRegistration {
    pub name: &'static str,
    pub build: fn(&Value) -> Result<Box<dyn EnvSpec>, BuildError>,
}

/// All selectable environment families.
pub fn registry() -> &'static [EnvRegistration] {
    &[
        EnvRegistration { name: "inventory", build: inventory::build_spec },
        EnvRegistration { name: "queue", build: queue::build_spec },
        EnvRegistration { name: "rl", build: rl::build_spec },
    ]
}

/// Look up `name` in the registry and build its spec from `params`.
pub fn build_env_spec(name: &str, params: &Value) -> Result<Box<dyn EnvSpec>, BuildError> {
    for reg in registry() {
        if reg.name == name {
            return (reg.build)(params);
        }
    }
    Err(BuildError::UnknownEnvironment(name.to_string()))
}

/// N(0, 1) draw. Centralized so every consumer shares one sampling path.
pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    use rand_distr::{Distribution, StandardNormal};
    StandardNormal.sample(rng)
}

/// Exp(1) draw by inversion.
pub fn standard_exponential(rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_knows_all_three() {
        let names: Vec<_> = registry().iter().map(|r| r.name).collect();
        assert_eq!(names, vec!["inventory", "queue", "rl"]);
    }

    #[test]
    fn unknown_name_is_rejected() {
        let err = build_env_spec("bandit", &serde_json::json!({})).unwrap_err();
        assert!(matches!(err, BuildError::UnknownEnvironment(_)));
    }
}
