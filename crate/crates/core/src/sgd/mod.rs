//! Environment-agnostic projected SGD driver for adaptively generated data.
//!
//! The data source is a Markov chain whose transition law depends on the
//! current decision vector: holding the decision fixed for a batch of `B`
//! transitions, the driver averages the per-sample gradient estimates, takes
//! one (optionally projected) gradient step, and maintains the step-size
//! weighted running average of the iterates. Everything is deterministic
//! given the seed.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::AdaptiveEnvironment;

/// Iterates whose magnitude passes this bound are treated as diverged.
pub const DIVERGENCE_BOUND: f64 = 1e12;

/// Decision vector. Dimension is fixed for the lifetime of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaVector(pub Vec<f64>);

impl ThetaVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn inf_norm(&self) -> f64 {
        self.0.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

impl From<Vec<f64>> for ThetaVector {
    fn from(v: Vec<f64>) -> Self {
        ThetaVector(v)
    }
}

/// One gradient estimate, same dimension as the decision vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSample(pub Vec<f64>);

/// Componentwise box constraint, or the whole space when `unbounded`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxProjection {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub unbounded: bool,
}

impl BoxProjection {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len(), "box bounds dimension mismatch");
        assert!(
            lower.iter().zip(&upper).all(|(l, u)| l <= u),
            "box lower bound exceeds upper bound"
        );
        BoxProjection { lower, upper, unbounded: false }
    }

    /// Projection that is the identity on all of R^m.
    pub fn unbounded(dim: usize) -> Self {
        BoxProjection {
            lower: vec![f64::NEG_INFINITY; dim],
            upper: vec![f64::INFINITY; dim],
            unbounded: true,
        }
    }

    pub fn contains(&self, theta: &ThetaVector) -> bool {
        self.unbounded
            || theta
                .0
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (l, u))| *x >= *l && *x <= *u)
    }
}

/// Step-size family: the decay shape of `t -> eta_t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScheduleFamily {
    InverseSqrt,
    InverseT,
    Constant,
}

/// Deterministic step-size rule `eta_t = eta0 * batch_scale * decay(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub family: ScheduleFamily,
    pub eta0: f64,
    pub batch_scale: f64,
}

impl StepSchedule {
    pub fn new(family: ScheduleFamily, eta0: f64) -> Self {
        assert!(eta0 > 0.0, "eta0 must be positive");
        StepSchedule { family, eta0, batch_scale: 1.0 }
    }

    pub fn with_batch_scale(mut self, batch_scale: f64) -> Self {
        assert!(batch_scale > 0.0, "batch_scale must be positive");
        self.batch_scale = batch_scale;
        self
    }
}

/// Step size at time `t >= 1`. Schedules are 1-indexed; `t = 0` is rejected.
pub fn step_size(schedule: &StepSchedule, t: u64) -> f64 {
    assert!(t >= 1, "step schedules are 1-indexed, got t = 0");
    let scale = schedule.eta0 * schedule.batch_scale;
    match schedule.family {
        ScheduleFamily::InverseSqrt => scale / (t as f64).sqrt(),
        ScheduleFamily::InverseT => scale / t as f64,
        ScheduleFamily::Constant => scale,
    }
}

/// Componentwise clamp of `theta` onto the box. Identity in unbounded mode.
/// NaN entries are rejected.
pub fn project(p: &BoxProjection, theta: &ThetaVector) -> ThetaVector {
    assert!(
        theta.0.iter().all(|x| !x.is_nan()),
        "cannot project a NaN iterate"
    );
    if p.unbounded {
        return theta.clone();
    }
    assert_eq!(theta.dim(), p.lower.len(), "projection dimension mismatch");
    ThetaVector(
        theta
            .0
            .iter()
            .zip(p.lower.iter().zip(&p.upper))
            .map(|(x, (l, u))| x.max(*l).min(*u))
            .collect(),
    )
}

/// One gradient step `P(theta - eta * g)`; plain `theta - eta * g` when no
/// projection is supplied.
pub fn sgd_update(
    theta: &ThetaVector,
    g: &GradientSample,
    eta: f64,
    p: Option<&BoxProjection>,
) -> ThetaVector {
    assert_eq!(theta.dim(), g.0.len(), "gradient dimension mismatch");
    let stepped = ThetaVector(
        theta
            .0
            .iter()
            .zip(&g.0)
            .map(|(x, gi)| x - eta * gi)
            .collect(),
    );
    match p {
        Some(p) => project(p, &stepped),
        None => stepped,
    }
}

/// Additive perturbation applied to the averaged gradient before the step,
/// with standard deviation `std0 / sqrt(k)` at update `k`. Off by default;
/// exists so tests can exercise the inexact-gradient path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientNoiseHook {
    pub std0: f64,
}

/// Run parameters. `horizon` counts *data samples*, not updates; the number
/// of updates is `floor(horizon / batch)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub horizon: u64,
    pub batch: u64,
    pub seed: u64,
    pub projection: Option<BoxProjection>,
    pub averaging: bool,
    pub replications: u32,
    /// Sample counts at which the iterate is recorded. `None` records after
    /// every update.
    pub checkpoints: Option<Vec<u64>>,
    pub gradient_noise: Option<GradientNoiseHook>,
}

impl RunConfig {
    pub fn new(horizon: u64, batch: u64, seed: u64) -> Self {
        assert!(batch >= 1 && horizon >= batch, "need horizon >= batch >= 1");
        RunConfig {
            horizon,
            batch,
            seed,
            projection: None,
            averaging: false,
            replications: 1,
            checkpoints: None,
            gradient_noise: None,
        }
    }

    pub fn with_projection(mut self, p: BoxProjection) -> Self {
        self.projection = Some(p);
        self
    }

    pub fn with_averaging(mut self, on: bool) -> Self {
        self.averaging = on;
        self
    }

    pub fn with_checkpoints(mut self, at: Vec<u64>) -> Self {
        self.checkpoints = Some(at);
        self
    }
}

/// Per-replication trajectory, indexed by cumulative samples consumed so
/// that runs with different batch sizes share one x-axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub sample_index: Vec<u64>,
    pub theta: Vec<ThetaVector>,
    pub theta_bar: Vec<ThetaVector>,
    /// Filled by the experiment harness from an environment oracle.
    pub loss_gap: Vec<f64>,
    /// Sample count at which the iterate left the finite range, if it did.
    pub diverged_at: Option<u64>,
    pub updates: u64,
}

/// Error raised when a replication cannot continue.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("environment failure at sample {sample}: {message}")]
    Environment { sample: u64, message: String },
}

/// Deterministic seed for replication `rep` of a base seed (splitmix64 over
/// the pair), so adding replications never perturbs earlier ones.
pub fn replication_seed(base: u64, rep: u64) -> u64 {
    let mut z = base ^ rep.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Incrementally maintained step-size-weighted average of the iterates.
#[derive(Debug, Clone)]
pub struct WeightedAverage {
    value: Vec<f64>,
    weight: f64,
}

impl WeightedAverage {
    pub fn new(theta0: &ThetaVector) -> Self {
        WeightedAverage { value: theta0.0.clone(), weight: 0.0 }
    }

    pub fn push(&mut self, theta: &ThetaVector, eta: f64) {
        self.weight += eta;
        let w = eta / self.weight;
        for (v, x) in self.value.iter_mut().zip(&theta.0) {
            *v += w * (x - *v);
        }
    }

    pub fn current(&self) -> ThetaVector {
        ThetaVector(self.value.clone())
    }
}

/// Drive SGD against an adaptive environment.
///
/// At update `k` the decision is held fixed while `batch` environment
/// transitions are drawn; the per-sample gradient estimates are averaged
/// into a single step. The schedule is evaluated at the cumulative sample
/// count `k * batch`, so a batch-`B` run with `batch_scale = B` reproduces
/// the same sample-axis step sizes as the single-sample run.
///
/// In unprojected mode an iterate that leaves the finite range (or the
/// environment's valid set) freezes the trace at its last good value and
/// the divergence time is recorded; projected mode treats non-finite
/// iterates as a hard error.
pub fn run_sgd(
    env: &mut dyn AdaptiveEnvironment,
    cfg: &RunConfig,
    schedule: &StepSchedule,
) -> Result<RunRecord, RunError> {
    let updates = cfg.horizon / cfg.batch;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    env.reset(&mut rng);

    let mut theta = env.theta0();
    if let Some(p) = &cfg.projection {
        theta = project(p, &theta);
    }
    let mut bar = WeightedAverage::new(&theta);

    let checkpoints: Vec<u64> = match &cfg.checkpoints {
        Some(c) => {
            debug_assert!(c.windows(2).all(|w| w[0] < w[1]), "checkpoints must increase");
            c.clone()
        }
        None => (1..=updates).map(|k| k * cfg.batch).collect(),
    };

    let mut record = RunRecord {
        sample_index: Vec::with_capacity(checkpoints.len()),
        theta: Vec::with_capacity(checkpoints.len()),
        theta_bar: Vec::with_capacity(checkpoints.len()),
        loss_gap: Vec::new(),
        diverged_at: None,
        updates,
    };

    let mut next_cp = 0usize;
    let mut frozen = false;
    let dim = theta.dim();

    // Checkpoints c with floor(c / B) = k see the iterate after k updates.
    let mut record_through = |k: u64,
                              theta: &ThetaVector,
                              bar: &WeightedAverage,
                              next_cp: &mut usize,
                              record: &mut RunRecord| {
        while *next_cp < checkpoints.len() && checkpoints[*next_cp] / cfg.batch == k {
            record.sample_index.push(checkpoints[*next_cp]);
            record.theta.push(theta.clone());
            record.theta_bar.push(bar.current());
            *next_cp += 1;
        }
    };

    record_through(0, &theta, &bar, &mut next_cp, &mut record);

    for k in 1..=updates {
        if !frozen {
            let mut g_sum = vec![0.0f64; dim];
            let mut failed: Option<String> = None;
            for _ in 0..cfg.batch {
                if let Err(e) = env.advance(&theta, &mut rng) {
                    failed = Some(e.to_string());
                    break;
                }
                match env.estimate_gradient(&theta) {
                    Ok(g) => {
                        for (s, gi) in g_sum.iter_mut().zip(&g.0) {
                            *s += gi;
                        }
                    }
                    Err(e) => {
                        failed = Some(e.to_string());
                        break;
                    }
                }
            }
            match failed {
                Some(message) if cfg.projection.is_some() => {
                    return Err(RunError::Environment { sample: k * cfg.batch, message });
                }
                Some(_) => {
                    // Unprojected runs are allowed to blow up; keep the trace.
                    record.diverged_at = Some(k * cfg.batch);
                    frozen = true;
                }
                None => {
                    for s in g_sum.iter_mut() {
                        *s /= cfg.batch as f64;
                    }
                    if let Some(hook) = &cfg.gradient_noise {
                        let std = hook.std0 / (k as f64).sqrt();
                        for s in g_sum.iter_mut() {
                            *s += std * crate::env::standard_normal(&mut rng);
                        }
                    }
                    let g = GradientSample(g_sum);
                    if cfg.projection.is_some() {
                        debug_assert!(
                            g.0.iter().all(|x| x.is_finite()),
                            "non-finite gradient in projected mode"
                        );
                    }
                    let eta = step_size(schedule, k * cfg.batch);
                    bar.push(&theta, eta);
                    let next = sgd_update(&theta, &g, eta, cfg.projection.as_ref());
                    let bad = !next.is_finite()
                        || next.inf_norm() > DIVERGENCE_BOUND
                        || !env.theta_valid(&next);
                    if bad {
                        if cfg.projection.is_some() {
                            return Err(RunError::Environment {
                                sample: k * cfg.batch,
                                message: "iterate left the valid range under projection".into(),
                            });
                        }
                        record.diverged_at = Some(k * cfg.batch);
                        frozen = true;
                    } else {
                        theta = next;
                    }
                }
            }
        }
        record_through(k, &theta, &bar, &mut next_cp, &mut record);
    }

    // Checkpoints past the last full batch (horizon not a multiple of B).
    while next_cp < checkpoints.len() {
        record.sample_index.push(checkpoints[next_cp]);
        record.theta.push(theta.clone());
        record.theta_bar.push(bar.current());
        next_cp += 1;
    }

    Ok(record)
}

/// Log-spaced checkpoint grid up to `horizon`, capped at 64 points per
/// decade, always containing 1 and `horizon`.
pub fn log_checkpoints(horizon: u64) -> Vec<u64> {
    assert!(horizon >= 1);
    let mut out: Vec<u64> = Vec::new();
    let decades = (horizon as f64).log10().ceil() as i64 + 1;
    for i in 0..=(64 * decades) {
        let x = 10f64.powf(i as f64 / 64.0).round() as u64;
        if x >= 1 && x <= horizon {
            out.push(x);
        }
    }
    out.push(horizon);
    out.sort_unstable();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_size_families() {
        let s = StepSchedule::new(ScheduleFamily::InverseSqrt, 1.0);
        assert_eq!(step_size(&s, 4), 0.5);
        let s = StepSchedule::new(ScheduleFamily::InverseT, 2.0);
        assert_eq!(step_size(&s, 2), 1.0);
        let s = StepSchedule::new(ScheduleFamily::InverseT, 2.0).with_batch_scale(10.0);
        assert_eq!(step_size(&s, 100), 0.2);
        let s = StepSchedule::new(ScheduleFamily::Constant, 0.3).with_batch_scale(2.0);
        assert_eq!(step_size(&s, 77), 0.6);
    }

    #[test]
    #[should_panic(expected = "1-indexed")]
    fn step_size_rejects_zero() {
        let s = StepSchedule::new(ScheduleFamily::Constant, 1.0);
        step_size(&s, 0);
    }

    #[test]
    fn projection_clamps() {
        let p = BoxProjection::new(vec![0.0], vec![5.0]);
        assert_eq!(project(&p, &ThetaVector(vec![7.0])).0, vec![5.0]);
        assert_eq!(project(&p, &ThetaVector(vec![3.0])).0, vec![3.0]);
        let p2 = BoxProjection::new(vec![0.0, 1.0], vec![5.0, 2.0]);
        assert_eq!(project(&p2, &ThetaVector(vec![-1.0, 1.5])).0, vec![0.0, 1.5]);
    }

    #[test]
    fn projection_idempotent_and_nonexpansive() {
        let p = BoxProjection::new(vec![-1.0, 0.0], vec![1.0, 2.0]);
        let a = ThetaVector(vec![3.0, -4.0]);
        let b = ThetaVector(vec![-0.5, 1.0]);
        let pa = project(&p, &a);
        let pb = project(&p, &b);
        assert_eq!(project(&p, &pa), pa);
        let d = |x: &ThetaVector, y: &ThetaVector| -> f64 {
            x.0.iter().zip(&y.0).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
        };
        assert!(d(&pa, &pb) <= d(&a, &b) + 1e-15);
    }

    #[test]
    #[should_panic(expected = "NaN")]
    fn projection_rejects_nan() {
        let p = BoxProjection::new(vec![0.0], vec![1.0]);
        project(&p, &ThetaVector(vec![f64::NAN]));
    }

    #[test]
    fn sgd_update_examples() {
        let no_box = sgd_update(
            &ThetaVector(vec![1.0]),
            &GradientSample(vec![2.0]),
            0.5,
            None,
        );
        assert_eq!(no_box.0, vec![0.0]);

        let zero_grad = sgd_update(
            &ThetaVector(vec![1.0]),
            &GradientSample(vec![0.0]),
            0.5,
            None,
        );
        assert_eq!(zero_grad.0, vec![1.0]);

        let p = BoxProjection::new(vec![0.0], vec![1.0]);
        let clamped = sgd_update(
            &ThetaVector(vec![0.2]),
            &GradientSample(vec![2.0]),
            0.5,
            Some(&p),
        );
        assert_eq!(clamped.0, vec![0.0]);
    }

    #[test]
    fn unbounded_projection_is_identity() {
        let p = BoxProjection::unbounded(3);
        let theta = ThetaVector(vec![1e9, -2e7, 0.0]);
        assert_eq!(project(&p, &theta), theta);
    }

    #[test]
    fn weighted_average_matches_direct_sum() {
        let mut avg = WeightedAverage::new(&ThetaVector(vec![0.0]));
        let thetas = [3.0, -1.0, 2.0, 8.0, 5.0];
        let etas = [1.0, 0.7, 0.5, 0.4, 0.35];
        let mut num = 0.0;
        let mut den = 0.0;
        for (x, e) in thetas.iter().zip(&etas) {
            avg.push(&ThetaVector(vec![*x]), *e);
            num += e * x;
            den += e;
        }
        let direct = num / den;
        let incr = avg.current().0[0];
        assert!(((incr - direct) / direct).abs() < 1e-12);
    }

    #[test]
    fn log_checkpoints_shape() {
        let cps = log_checkpoints(10_000);
        assert_eq!(*cps.first().unwrap(), 1);
        assert_eq!(*cps.last().unwrap(), 10_000);
        assert!(cps.windows(2).all(|w| w[0] < w[1]));
        // 64-per-decade cap
        let in_decade = cps.iter().filter(|&&c| c > 1000 && c <= 10_000).count();
        assert!(in_decade <= 64);
    }

    #[test]
    fn replication_seeds_distinct_and_stable() {
        let s1 = replication_seed(42, 0);
        let s2 = replication_seed(42, 1);
        assert_ne!(s1, s2);
        assert_eq!(s1, replication_seed(42, 0));
    }
}
