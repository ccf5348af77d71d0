//! Monte-Carlo stationary losses for the inventory chain.
//!
//! Long-run cost at a fixed base-stock is a time average over the demand
//! chain; standard errors come from batch means (the chain is
//! autocorrelated, so the i.i.d. CLT would understate them). The gap oracle
//! tabulates the loss on the whole feasible grid with *common random
//! numbers* — one shared noise stream across every grid point — so the
//! tabulated surface is smooth in `theta` and gap differences near the
//! optimum are far more accurate than the pointwise standard errors.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::inventory::{
    inventory_loss, inventory_transition, InventoryParams, InventoryState,
};
use crate::env::{standard_normal, OracleContext, OracleError};
use crate::oracles::cache::OracleCache;

/// Batch-means batch count for every long-run average in the suite.
pub const BATCH_MEANS_BATCHES: usize = 50;

/// Shared noise stream id for the tabulated surface.
const TABULATION_SEED: u64 = 0x1234_5678_9abc_def0;

/// Time-average stationary cost at `theta` with batch-means standard error.
///
/// `burn_in` must be at least 1e3 and `samples` at least 1e5 so the batch
/// means are long enough to decorrelate.
pub fn mc_stationary_loss(
    params: &InventoryParams,
    theta: f64,
    burn_in: usize,
    samples: usize,
    seed: u64,
) -> (f64, f64) {
    assert!(burn_in >= 1_000, "burn_in below 1e3");
    assert!(samples >= 100_000, "samples below 1e5");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    time_average_loss(params, theta, burn_in, samples, &mut rng)
}

/// Unchecked core of [`mc_stationary_loss`]; also used by the tabulation
/// pre-pass with smaller sample counts.
fn time_average_loss(
    params: &InventoryParams,
    theta: f64,
    burn_in: usize,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> (f64, f64) {
    let mut state = InventoryState::initial();
    for _ in 0..burn_in {
        let u = params.sigma * standard_normal(rng);
        let e = params.sigma * standard_normal(rng);
        state = inventory_transition(state, theta, params, (u, e));
    }
    let batch_len = samples / BATCH_MEANS_BATCHES;
    let mut batch_means = [0.0f64; BATCH_MEANS_BATCHES];
    for mean in batch_means.iter_mut() {
        let mut acc = 0.0;
        for _ in 0..batch_len {
            let u = params.sigma * standard_normal(rng);
            let e = params.sigma * standard_normal(rng);
            state = inventory_transition(state, theta, params, (u, e));
            acc += inventory_loss(state.d, theta, params);
        }
        *mean = acc / batch_len as f64;
    }
    mean_and_stderr(&batch_means)
}

/// Sample mean and standard error of a set of (batch) means.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Stationary loss tabulated on a uniform grid over `[0, theta_max]`,
/// linearly interpolated between nodes. `theta_star`/`loss_star` anchor the
/// gap curves; by construction the interpolant never dips below `loss_star`,
/// so gaps are nonnegative.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InventoryLossTable {
    pub grid_step: f64,
    pub theta_max: f64,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub theta_star: f64,
    pub loss_star: f64,
}

impl InventoryLossTable {
    pub fn loss(&self, theta: f64) -> f64 {
        let t = theta.clamp(0.0, self.theta_max);
        let pos = t / self.grid_step;
        let i = (pos.floor() as usize).min(self.mean.len() - 2);
        let frac = pos - i as f64;
        self.mean[i] * (1.0 - frac) + self.mean[i + 1] * frac
    }

    pub fn gap(&self, theta: f64) -> f64 {
        (self.loss(theta) - self.loss_star).max(0.0)
    }
}

#[derive(Serialize)]
struct TabulationKey<'a> {
    params: &'a InventoryParams,
    grid_step: f64,
    base_samples: usize,
    refine_samples: usize,
    refine_radius: f64,
    burn_in: usize,
    seed: u64,
    version: u32,
}

/// Build (or load from cache) the CRN loss table for one parameter set.
///
/// Two passes: every node gets a base-length run, then nodes within
/// `refine_radius` of the coarse argmin get a longer run on the same noise
/// stream, sharpening the surface exactly where gap curves bottom out.
pub fn tabulate_stationary_loss(
    params: &InventoryParams,
    ctx: &OracleContext,
) -> Result<InventoryLossTable, OracleError> {
    let grid_step = 0.01;
    let base_samples = 400_000;
    let refine_samples = 4_000_000;
    let refine_radius = 1.0;
    let burn_in = 10_000;

    let cache = OracleCache::new(ctx.cache_dir.clone());
    let key = cache.key(
        "inventory-loss-table",
        &TabulationKey {
            params,
            grid_step,
            base_samples,
            refine_samples,
            refine_radius,
            burn_in,
            seed: TABULATION_SEED,
            version: 1,
        },
    );
    if let Some(table) = cache.load::<InventoryLossTable>(&key) {
        return Ok(table);
    }

    let n = (params.theta_max / grid_step).round() as usize;
    let node = |i: usize| i as f64 * grid_step;

    let run = |theta: f64, samples: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(TABULATION_SEED);
        time_average_loss(params, theta, burn_in, samples, &mut rng)
    };

    let mut rows: Vec<(f64, f64)> = (0..=n)
        .into_par_iter()
        .map(|i| run(node(i), base_samples))
        .collect();

    let coarse_argmin = argmin(&rows);
    let refine_lo = node(coarse_argmin) - refine_radius;
    let refine_hi = node(coarse_argmin) + refine_radius;
    let refined: Vec<(usize, (f64, f64))> = (0..=n)
        .into_par_iter()
        .filter(|&i| node(i) >= refine_lo && node(i) <= refine_hi)
        .map(|i| (i, run(node(i), refine_samples)))
        .collect();
    for (i, row) in refined {
        rows[i] = row;
    }

    let best = argmin(&rows);
    let theta_star = node(best);
    let loss_star = rows[best].0;
    let margin = grid_step;
    if (theta_star <= margin || theta_star >= params.theta_max - margin) && !ctx.allow_boundary {
        return Err(OracleError::BoundaryOptimum(format!(
            "stationary-loss argmin {theta_star:.4} touches [0, {}]",
            params.theta_max
        )));
    }

    let table = InventoryLossTable {
        grid_step,
        theta_max: params.theta_max,
        mean: rows.iter().map(|r| r.0).collect(),
        stderr: rows.iter().map(|r| r.1).collect(),
        theta_star,
        loss_star,
    };
    cache.store(&key, &table);
    Ok(table)
}

fn argmin(rows: &[(f64, f64)]) -> usize {
    rows.iter()
        .enumerate()
        .min_by(|a, b| a.1 .0.partial_cmp(&b.1 .0).unwrap())
        .map(|(i, _)| i)
        .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_noise_pins_demand_at_drift() {
        // sigma -> 0: stationary demand sits at m, so cost = h (theta - m).
        let params = InventoryParams {
            alpha: 0.8,
            m: 5.0,
            sigma: 1e-4,
            h: 1.0,
            b: 10.0,
            theta_max: 20.0,
        };
        let (mean, _) = mc_stationary_loss(&params, 6.0, 1_000, 100_000, 77);
        assert!((mean - 1.0).abs() < 0.01, "got {mean}");
    }

    #[test]
    fn matches_exact_ar1_law_when_damping_never_binds() {
        // Large theta and b = h: cost is h E|D - theta| with D from the
        // undamped AR(1) stationary law N(m, sigma^2 / (1 - alpha^2)),
        // evaluated here by quadrature.
        let params = InventoryParams {
            alpha: 0.8,
            m: 5.0,
            sigma: 1.0,
            h: 1.0,
            b: 1.0,
            theta_max: 30.0,
        };
        let theta = 12.0;
        let sd = (params.sigma * params.sigma / (1.0 - params.alpha * params.alpha)).sqrt();
        let expected = {
            // E|X - theta| over N(m, sd^2) by Simpson's rule on +-8 sd.
            let steps = 4000;
            let lo = params.m - 8.0 * sd;
            let hi = params.m + 8.0 * sd;
            let h = (hi - lo) / steps as f64;
            let density = |x: f64| {
                let z = (x - params.m) / sd;
                (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
            };
            let f = |x: f64| (x - theta).abs() * density(x);
            let mut acc = f(lo) + f(hi);
            for i in 1..steps {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * f(lo + i as f64 * h);
            }
            acc * h / 3.0
        };
        let (mean, stderr) = mc_stationary_loss(&params, theta, 2_000, 400_000, 3);
        assert!(
            (mean - expected).abs() < 4.0 * stderr + 0.005,
            "mc {mean} vs exact {expected} (stderr {stderr})"
        );
    }

    #[test]
    fn independent_seeds_agree() {
        let params = InventoryParams::default();
        let (m1, s1) = mc_stationary_loss(&params, 6.0, 1_000, 200_000, 101);
        let (m2, s2) = mc_stationary_loss(&params, 6.0, 1_000, 200_000, 202);
        let combined = (s1 * s1 + s2 * s2).sqrt();
        assert!((m1 - m2).abs() < 4.0 * combined, "{m1} vs {m2} +- {combined}");
    }

    #[test]
    fn table_interpolation_and_gap_floor() {
        let table = InventoryLossTable {
            grid_step: 0.5,
            theta_max: 2.0,
            mean: vec![4.0, 2.0, 1.0, 2.0, 4.0],
            stderr: vec![0.0; 5],
            theta_star: 1.0,
            loss_star: 1.0,
        };
        assert_eq!(table.loss(0.75), 1.5);
        assert_eq!(table.gap(1.0), 0.0);
        assert_eq!(table.gap(2.0), 3.0);
        // Clamped outside the feasible interval.
        assert_eq!(table.loss(-1.0), 4.0);
        assert_eq!(table.loss(99.0), 4.0);
        assert!(table.gap(1.25) >= 0.0);
    }
}
