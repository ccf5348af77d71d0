//! Statistical property checks tying the samplers to their independent
//! oracles: pathwise-derivative agreement with finite differences,
//! estimator unbiasedness under stationarity, occupancy and critic
//! stationarity, and oracle self-consistency.
//!
//! Each check returns a pass/fail outcome with a one-line diagnostic; the
//! CLI `check` subcommand prints them as a table and the acceptance suite
//! asserts them at full scale.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::env::inventory::{
    inventory_gradient, inventory_loss, inventory_transition, InventoryParams, InventoryState,
};
use crate::env::queue::{
    mm1_loss, mm1_loss_gradient, mm1_wait_mean, queue_gradient, queue_transition, demand_rate,
    ExpExpSampler, QueueParams, QueueState, ServiceArrivalSampler,
};
use crate::env::rl::{MdpSpec, RlEnv, SoftmaxPolicy};
use crate::env::{standard_normal, AdaptiveEnvironment};
use crate::oracles::mc::{mean_and_stderr, BATCH_MEANS_BATCHES};
use crate::oracles::mdp::{
    exact_pg_gradient, occupancy_series, occupancy_solve, policy_eval_linear, policy_loss,
    stationary_pg_gradient, value_iteration, EvalTarget,
};
use crate::oracles::optimize::{grid_optimum_1d, grid_optimum_2d, Domain2};
use crate::oracles::rates::{fit_rate, LossCurve};
use crate::sgd::{log_checkpoints, ThetaVector};

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        CheckOutcome { name: name.to_string(), passed, detail }
    }
}

/// Sample-size knobs; `fast()` shrinks everything for smoke runs.
#[derive(Debug, Clone, Copy)]
pub struct CheckSizes {
    pub ipa_paths: usize,
    pub inventory_samples: usize,
    pub queue_samples: usize,
    pub rl_samples: usize,
    pub occupancy_steps: usize,
    pub critic_steps: usize,
    pub regen_steps: usize,
}

impl CheckSizes {
    pub fn full() -> Self {
        CheckSizes {
            ipa_paths: 1_000,
            inventory_samples: 1_000_000,
            queue_samples: 10_000_000,
            rl_samples: 10_000_000,
            occupancy_steps: 1_000_000,
            critic_steps: 10_000_000,
            regen_steps: 1_000_000,
        }
    }

    pub fn fast() -> Self {
        CheckSizes {
            ipa_paths: 200,
            inventory_samples: 150_000,
            queue_samples: 500_000,
            rl_samples: 500_000,
            occupancy_steps: 150_000,
            critic_steps: 600_000,
            regen_steps: 100_000,
        }
    }
}

/// The seeded 3-state, 2-action instance every stationarity check runs on.
pub fn fixture_mdp() -> MdpSpec {
    MdpSpec::random(3, 2, 0.8, 0x00f1_77e5)
}

/// Mildly non-uniform fixture logits, away from both saturation and
/// uniformity.
pub fn fixture_theta(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.4 * ((i as f64) * 0.9).sin()).collect()
}

/// Run every check whose name starts with `filter` (all when `None`).
pub fn run_checks(filter: Option<&str>, sizes: &CheckSizes) -> Vec<CheckOutcome> {
    let all: Vec<fn(&CheckSizes) -> CheckOutcome> = vec![
        check_inventory_ipa_fd,
        check_inventory_unbiasedness,
        check_inventory_derivative_range,
        check_inventory_coupling,
        check_queue_unbiasedness,
        check_queue_littles_law,
        check_queue_regeneration,
        check_rl_occupancy_stationarity,
        check_rl_critic_stationarity,
        check_rl_unbiasedness,
        check_rl_regeneration_rate,
        check_rl_score_mean_zero,
        check_oracle_vi_vs_linear,
        check_oracle_pg_vs_fd,
        check_oracle_occupancy_series,
        check_oracle_grid_optimum,
        check_fit_rate_synthetic,
    ];
    all.iter()
        .map(|f| f(sizes))
        .filter(|o| filter.map_or(true, |p| o.name.starts_with(p)))
        .collect()
}

// ---------------------------------------------------------------------------
// inventory
// ---------------------------------------------------------------------------

/// Pathwise derivative versus central finite differences under common random
/// numbers. Paths with a trajectory kink inside the difference stencil are
/// skipped and resampled; on kink-free paths the map is affine in the
/// base-stock, so agreement is exact up to rounding.
fn check_inventory_ipa_fd(sizes: &CheckSizes) -> CheckOutcome {
    let params = InventoryParams::default();
    let theta = 6.0;
    let delta = 1e-5;
    let t_max = 50;
    let tol = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(0x1bad_cafe);

    let mut accepted = 0usize;
    let mut skipped = 0usize;
    let mut worst = 0.0f64;
    'paths: while accepted < sizes.ipa_paths {
        let mut lo = InventoryState::initial();
        let mut mid = InventoryState::initial();
        let mut hi = InventoryState::initial();
        for _ in 0..t_max {
            let u = params.sigma * standard_normal(&mut rng);
            let e = params.sigma * standard_normal(&mut rng);
            // Kink if the three perturbed paths disagree on either branch.
            let stockouts = [
                lo.d + u > theta - delta,
                mid.d + u > theta,
                hi.d + u > theta + delta,
            ];
            let raw = |s: &InventoryState, th: f64| {
                params.alpha * (s.d + u).min(th) + (1.0 - params.alpha) * params.m + e
            };
            let positives = [
                raw(&lo, theta - delta) > 0.0,
                raw(&mid, theta) > 0.0,
                raw(&hi, theta + delta) > 0.0,
            ];
            if stockouts[0] != stockouts[2]
                || stockouts[0] != stockouts[1]
                || positives[0] != positives[2]
                || positives[0] != positives[1]
            {
                skipped += 1;
                continue 'paths;
            }
            lo = inventory_transition(lo, theta - delta, &params, (u, e));
            mid = inventory_transition(mid, theta, &params, (u, e));
            hi = inventory_transition(hi, theta + delta, &params, (u, e));
            let fd = (hi.d - lo.d) / (2.0 * delta);
            worst = worst.max((mid.l - fd).abs());
        }
        accepted += 1;
    }
    let skip_rate = skipped as f64 / (accepted + skipped) as f64;
    CheckOutcome::new(
        "inventory-ipa-fd",
        worst <= tol,
        format!(
            "max |L_t - FD| = {worst:.2e} over {accepted} paths, t <= {t_max} \
             (tol {tol:.0e}, skip rate {skip_rate:.4})"
        ),
    )
}

/// Common-random-number central difference of the Monte-Carlo stationary
/// loss, with batch-means standard error of the paired difference.
fn crn_fd_stationary_loss(
    params: &InventoryParams,
    theta: f64,
    delta: f64,
    burn_in: usize,
    samples: usize,
    seed: u64,
) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lo = InventoryState::initial();
    let mut hi = InventoryState::initial();
    for _ in 0..burn_in {
        let u = params.sigma * standard_normal(&mut rng);
        let e = params.sigma * standard_normal(&mut rng);
        lo = inventory_transition(lo, theta - delta, params, (u, e));
        hi = inventory_transition(hi, theta + delta, params, (u, e));
    }
    let batch_len = samples / BATCH_MEANS_BATCHES;
    let mut diffs = [0.0f64; BATCH_MEANS_BATCHES];
    for d in diffs.iter_mut() {
        let mut acc = 0.0;
        for _ in 0..batch_len {
            let u = params.sigma * standard_normal(&mut rng);
            let e = params.sigma * standard_normal(&mut rng);
            lo = inventory_transition(lo, theta - delta, params, (u, e));
            hi = inventory_transition(hi, theta + delta, params, (u, e));
            acc += inventory_loss(hi.d, theta + delta, params)
                - inventory_loss(lo.d, theta - delta, params);
        }
        *d = acc / batch_len as f64;
    }
    let (mean, se) = mean_and_stderr(&diffs);
    (mean / (2.0 * delta), se / (2.0 * delta))
}

/// Long-run gradient-estimator mean at fixed theta.
fn inventory_gradient_mean(
    params: &InventoryParams,
    theta: f64,
    burn_in: usize,
    samples: usize,
    seed: u64,
) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = InventoryState::initial();
    for _ in 0..burn_in {
        let u = params.sigma * standard_normal(&mut rng);
        let e = params.sigma * standard_normal(&mut rng);
        s = inventory_transition(s, theta, params, (u, e));
    }
    let batch_len = samples / BATCH_MEANS_BATCHES;
    let mut means = [0.0f64; BATCH_MEANS_BATCHES];
    for m in means.iter_mut() {
        let mut acc = 0.0;
        for _ in 0..batch_len {
            let u = params.sigma * standard_normal(&mut rng);
            let e = params.sigma * standard_normal(&mut rng);
            s = inventory_transition(s, theta, params, (u, e));
            acc += inventory_gradient(&s, theta, params);
        }
        *m = acc / batch_len as f64;
    }
    mean_and_stderr(&means)
}

fn check_inventory_unbiasedness(sizes: &CheckSizes) -> CheckOutcome {
    let params = InventoryParams::default();
    let thetas = [5.0, 6.5, 8.0];
    let delta = 0.05;
    let burn = 10_000;

    let rows: Vec<(f64, f64, f64, f64, f64)> = thetas
        .par_iter()
        .map(|&theta| {
            let (g_mean, g_se) =
                inventory_gradient_mean(&params, theta, burn, sizes.inventory_samples, 0xabc0);
            let (fd, fd_se) = crn_fd_stationary_loss(
                &params,
                theta,
                delta,
                burn,
                sizes.inventory_samples,
                0xabc1,
            );
            let combined = (g_se * g_se + fd_se * fd_se).sqrt();
            (theta, g_mean, fd, combined, (g_mean - fd).abs())
        })
        .collect();

    let passed = rows.iter().all(|r| r.4 <= 3.0 * r.3);
    let detail = rows
        .iter()
        .map(|r| format!("theta {:.1}: est {:+.4} vs FD {:+.4} (3se {:.4})", r.0, r.1, r.2, 3.0 * r.3))
        .collect::<Vec<_>>()
        .join("; ");
    CheckOutcome::new("inventory-unbiasedness", passed, detail)
}

fn check_inventory_derivative_range(sizes: &CheckSizes) -> CheckOutcome {
    let params = InventoryParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut s = InventoryState::initial();
    let steps = sizes.regen_steps;
    let mut ok = true;
    for _ in 0..steps {
        let u = params.sigma * standard_normal(&mut rng);
        let e = params.sigma * standard_normal(&mut rng);
        s = inventory_transition(s, 6.0, &params, (u, e));
        if !(0.0..=params.alpha).contains(&s.l) || s.d < 0.0 {
            ok = false;
            break;
        }
    }
    CheckOutcome::new(
        "inventory-derivative-range",
        ok,
        format!("L stayed in [0, {}] over {steps} steps", params.alpha),
    )
}

fn check_inventory_coupling(sizes: &CheckSizes) -> CheckOutcome {
    let params = InventoryParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut a = InventoryState { d: 0.0, l: 0.0 };
    let mut b = InventoryState { d: 18.0, l: 0.8 };
    let mut coupled = None;
    let steps = sizes.regen_steps;
    for t in 0..steps {
        let u = params.sigma * standard_normal(&mut rng);
        let e = params.sigma * standard_normal(&mut rng);
        a = inventory_transition(a, 6.0, &params, (u, e));
        b = inventory_transition(b, 6.0, &params, (u, e));
        match coupled {
            None => {
                if a.d == 0.0 && b.d == 0.0 {
                    coupled = Some(t);
                }
            }
            Some(_) => {
                if a != b {
                    return CheckOutcome::new(
                        "inventory-coupling",
                        false,
                        format!("states separated after coupling at step {t}"),
                    );
                }
            }
        }
    }
    CheckOutcome::new(
        "inventory-coupling",
        coupled.is_some(),
        match coupled {
            Some(t) => format!("chains coupled at the empty state after {t} steps"),
            None => format!("no simultaneous visit to the empty state in {steps} steps"),
        },
    )
}

// ---------------------------------------------------------------------------
// queue
// ---------------------------------------------------------------------------

/// Long-run mean of the queue gradient estimator, per component, with
/// batch-means standard errors.
fn queue_gradient_mean(
    params: &QueueParams,
    mu: f64,
    p: f64,
    burn_in: usize,
    samples: usize,
    seed: u64,
) -> ([f64; 2], [f64; 2]) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sampler = ExpExpSampler;
    let mut s = QueueState::initial();
    for _ in 0..burn_in {
        s = queue_transition(s, mu, p, params, sampler.sample(&mut rng));
    }
    let batch_len = samples / BATCH_MEANS_BATCHES;
    let mut means_mu = [0.0f64; BATCH_MEANS_BATCHES];
    let mut means_p = [0.0f64; BATCH_MEANS_BATCHES];
    for b in 0..BATCH_MEANS_BATCHES {
        let mut acc = [0.0f64; 2];
        for _ in 0..batch_len {
            s = queue_transition(s, mu, p, params, sampler.sample(&mut rng));
            let g = queue_gradient(&s, mu, p, params).expect("mu > 0");
            acc[0] += g[0];
            acc[1] += g[1];
        }
        means_mu[b] = acc[0] / batch_len as f64;
        means_p[b] = acc[1] / batch_len as f64;
    }
    let (m0, s0) = mean_and_stderr(&means_mu);
    let (m1, s1) = mean_and_stderr(&means_p);
    ([m0, m1], [s0, s1])
}

fn check_queue_unbiasedness(sizes: &CheckSizes) -> CheckOutcome {
    let params = QueueParams::default();
    let configs = [(7.5, 5.0), (6.0, 4.5), (9.0, 3.8)];
    let rows: Vec<String> = configs
        .par_iter()
        .map(|&(mu, p)| {
            let truth = mm1_loss_gradient(mu, p, &params).expect("stable");
            let seed = 0x0c7_u64 + mu.to_bits() % 1000;
            let (mean, se) = queue_gradient_mean(&params, mu, p, 100_000, sizes.queue_samples, seed);
            let ok_mu = (mean[0] - truth[0]).abs() <= 3.0 * se[0];
            let ok_p = (mean[1] - truth[1]).abs() <= 3.0 * se[1];
            format!(
                "({mu},{p}): d/dmu {:+.4} vs {:+.4}, d/dp {:+.4} vs {:+.4} -> {}",
                mean[0],
                truth[0],
                mean[1],
                truth[1],
                if ok_mu && ok_p { "ok" } else { "MISMATCH" }
            )
        })
        .collect();
    let passed = rows.iter().all(|r| r.ends_with("ok"));
    CheckOutcome::new("queue-unbiasedness", passed, rows.join("; "))
}

fn check_queue_littles_law(sizes: &CheckSizes) -> CheckOutcome {
    let params = QueueParams::default();
    let (mu, p) = (7.5, 5.0);
    let lambda = demand_rate(p, &params);
    let mut rng = ChaCha8Rng::seed_from_u64(0x71f);
    let sampler = ExpExpSampler;
    let mut s = QueueState::initial();
    for _ in 0..100_000 {
        s = queue_transition(s, mu, p, &params, sampler.sample(&mut rng));
    }
    let n = sizes.queue_samples;
    let mut acc = 0.0;
    for _ in 0..n {
        s = queue_transition(s, mu, p, &params, sampler.sample(&mut rng));
        acc += s.w;
    }
    let simulated = acc / n as f64;
    let exact = mm1_wait_mean(mu, lambda);
    let rel = (simulated - exact).abs() / exact;
    CheckOutcome::new(
        "queue-littles-law",
        rel <= 0.01,
        format!("E[W] simulated {simulated:.5} vs exact {exact:.5} (rel {rel:.4})"),
    )
}

fn check_queue_regeneration(sizes: &CheckSizes) -> CheckOutcome {
    let params = QueueParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0b5);
    let sampler = ExpExpSampler;
    let mut s = QueueState::initial();
    let mut resets = 0u64;
    for _ in 0..sizes.regen_steps {
        s = queue_transition(s, 6.5, 4.6, &params, sampler.sample(&mut rng));
        if s.w == 0.0 {
            if s.x != 0.0 {
                return CheckOutcome::new(
                    "queue-regeneration",
                    false,
                    "busy time survived an empty system".into(),
                );
            }
            resets += 1;
        }
    }
    CheckOutcome::new(
        "queue-regeneration",
        resets > 0,
        format!("{resets} regenerations, busy time reset every time"),
    )
}

// ---------------------------------------------------------------------------
// rl
// ---------------------------------------------------------------------------

fn check_rl_occupancy_stationarity(sizes: &CheckSizes) -> CheckOutcome {
    let mdp = fixture_mdp();
    let dim = mdp.n_states * mdp.n_actions;
    let theta = ThetaVector(fixture_theta(dim));
    let policy = SoftmaxPolicy::from_theta(&theta.0, mdp.n_states, mdp.n_actions);
    let nu = occupancy_solve(&mdp, &policy);

    let mut env = RlEnv::new(std::sync::Arc::new(mdp.clone()), 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(0x0cc);
    env.reset(&mut rng);
    // Burn-in so the triad forgets the start.
    for _ in 0..10_000 {
        env.advance(&theta, &mut rng).unwrap();
    }
    let n = sizes.occupancy_steps;
    let mut counts = vec![0u64; dim];
    for _ in 0..n {
        let st = env.state();
        counts[st.s * mdp.n_actions + st.a] += 1;
        env.advance(&theta, &mut rng).unwrap();
    }
    let mut worst_z = 0.0f64;
    for i in 0..dim {
        let expect = n as f64 * nu[i];
        let sigma = (n as f64 * nu[i] * (1.0 - nu[i])).sqrt();
        worst_z = worst_z.max((counts[i] as f64 - expect).abs() / sigma);
    }
    CheckOutcome::new(
        "rl-occupancy-stationarity",
        worst_z <= 4.0,
        format!("max |z| = {worst_z:.2} across {dim} pairs over {n} steps (bound 4)"),
    )
}

fn check_rl_critic_stationarity(sizes: &CheckSizes) -> CheckOutcome {
    let mdp = fixture_mdp();
    let dim = mdp.n_states * mdp.n_actions;
    let theta = ThetaVector(fixture_theta(dim));
    let policy = SoftmaxPolicy::from_theta(&theta.0, mdp.n_states, mdp.n_actions);
    let q_true = value_iteration(&mdp, EvalTarget::Policy(&policy), 1e-12);

    let mut env = RlEnv::new(std::sync::Arc::new(mdp.clone()), 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(0xc217);
    env.reset(&mut rng);
    for _ in 0..100_000 {
        env.advance(&theta, &mut rng).unwrap();
    }
    // Time-batched conditional sums: per batch, per pair.
    let n = sizes.critic_steps;
    let batch_len = n / BATCH_MEANS_BATCHES;
    let mut batch_means = vec![[0.0f64; BATCH_MEANS_BATCHES]; dim];
    for b in 0..BATCH_MEANS_BATCHES {
        let mut sums = vec![0.0f64; dim];
        let mut counts = vec![0u64; dim];
        for _ in 0..batch_len {
            let st = env.state();
            let idx = st.s * mdp.n_actions + st.a;
            sums[idx] += st.q[idx];
            counts[idx] += 1;
            env.advance(&theta, &mut rng).unwrap();
        }
        for i in 0..dim {
            if counts[i] == 0 {
                return CheckOutcome::new(
                    "rl-critic-stationarity",
                    false,
                    format!("pair {i} unvisited in a batch; batches too short"),
                );
            }
            batch_means[i][b] = sums[i] / counts[i] as f64;
        }
    }
    let mut rows = Vec::new();
    let mut passed = true;
    for i in 0..dim {
        let (mean, se) = mean_and_stderr(&batch_means[i]);
        let ok = (mean - q_true[i]).abs() <= 3.0 * se;
        passed &= ok;
        rows.push(format!("({},{}) {:.3}~{:.3}", i / mdp.n_actions, i % mdp.n_actions, mean, q_true[i]));
    }
    CheckOutcome::new(
        "rl-critic-stationarity",
        passed,
        format!("conditional critic means vs exact Q: {}", rows.join(" ")),
    )
}

fn check_rl_unbiasedness(sizes: &CheckSizes) -> CheckOutcome {
    let mdp = fixture_mdp();
    let dim = mdp.n_states * mdp.n_actions;
    let base = fixture_theta(dim);
    let thetas: Vec<Vec<f64>> = vec![
        vec![0.0; dim],
        base.clone(),
        base.iter().map(|x| -1.5 * x).collect(),
    ];
    let rows: Vec<(bool, String)> = thetas
        .par_iter()
        .enumerate()
        .map(|(which, th)| {
            let theta = ThetaVector(th.clone());
            let policy = SoftmaxPolicy::from_theta(th, mdp.n_states, mdp.n_actions);
            // Mean of the estimator under the triad's stationary law equals
            // the exact gradient scaled by (1 - gamma).
            let target = stationary_pg_gradient(&mdp, &policy);
            let mut env = RlEnv::new(std::sync::Arc::new(mdp.clone()), 0.5);
            let mut rng = ChaCha8Rng::seed_from_u64(0x9_000 + which as u64);
            env.reset(&mut rng);
            for _ in 0..100_000 {
                env.advance(&theta, &mut rng).unwrap();
            }
            let n = sizes.rl_samples;
            let batch_len = n / BATCH_MEANS_BATCHES;
            let mut batches = vec![vec![0.0f64; BATCH_MEANS_BATCHES]; dim];
            for b in 0..BATCH_MEANS_BATCHES {
                let mut acc = vec![0.0f64; dim];
                for _ in 0..batch_len {
                    env.advance(&theta, &mut rng).unwrap();
                    let g = env.estimate_gradient(&theta).unwrap();
                    for (a, gi) in acc.iter_mut().zip(&g.0) {
                        *a += gi;
                    }
                }
                for i in 0..dim {
                    batches[i][b] = acc[i] / batch_len as f64;
                }
            }
            let mut ok = true;
            let mut worst = 0.0f64;
            for i in 0..dim {
                let (mean, se) = mean_and_stderr(&batches[i]);
                let z = (mean - target[i]).abs() / se.max(1e-300);
                worst = worst.max(z);
                ok &= (mean - target[i]).abs() <= 3.0 * se;
            }
            (ok, format!("theta#{which}: max |z| {worst:.2}"))
        })
        .collect();
    let passed = rows.iter().all(|r| r.0);
    CheckOutcome::new(
        "rl-unbiasedness",
        passed,
        rows.iter().map(|r| r.1.clone()).collect::<Vec<_>>().join("; "),
    )
}

fn check_rl_regeneration_rate(sizes: &CheckSizes) -> CheckOutcome {
    let mdp = fixture_mdp();
    let dim = mdp.n_states * mdp.n_actions;
    let theta = ThetaVector(fixture_theta(dim));
    let mut env = RlEnv::new(std::sync::Arc::new(mdp.clone()), 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(0x9e9);
    env.reset(&mut rng);
    let n = sizes.regen_steps;
    for _ in 0..n {
        env.advance(&theta, &mut rng).unwrap();
    }
    let rate = env.regeneration_rate();
    let want = 1.0 - mdp.gamma;
    let sigma = (want * (1.0 - want) / n as f64).sqrt();
    let z = (rate - want).abs() / sigma;
    CheckOutcome::new(
        "rl-regeneration-rate",
        z <= 4.0,
        format!("regen rate {rate:.5} vs {want:.5} (z = {z:.2})"),
    )
}

fn check_rl_score_mean_zero(_sizes: &CheckSizes) -> CheckOutcome {
    let policy = SoftmaxPolicy::from_theta(&fixture_theta(12), 4, 3);
    let mut worst = 0.0f64;
    for s in 0..4 {
        let pi = policy.probs(s);
        // sum_a pi(a|s) (e_a - pi(.|s)) must vanish coordinatewise.
        for j in 0..3 {
            let mut acc = 0.0;
            for (a, &pa) in pi.iter().enumerate() {
                let e = if a == j { 1.0 } else { 0.0 };
                acc += pa * (e - pi[j]);
            }
            worst = worst.max(acc.abs());
        }
    }
    CheckOutcome::new(
        "rl-score-mean-zero",
        worst <= 1e-10,
        format!("max |sum_a pi grad log pi| = {worst:.2e}"),
    )
}

// ---------------------------------------------------------------------------
// oracles
// ---------------------------------------------------------------------------

fn check_oracle_vi_vs_linear(_sizes: &CheckSizes) -> CheckOutcome {
    let mdp = MdpSpec::random(5, 5, 0.8, 0x5eed);
    let policy = SoftmaxPolicy::from_theta(&fixture_theta(25), 5, 5);
    let q_vi = value_iteration(&mdp, EvalTarget::Policy(&policy), 1e-12);
    let (q_lin, _) = policy_eval_linear(&mdp, &policy);
    let worst = q_vi
        .iter()
        .zip(&q_lin)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    CheckOutcome::new(
        "oracle-vi-vs-linear",
        worst <= 1e-8,
        format!("max |Q_vi - Q_linear| = {worst:.2e} (tol 1e-8)"),
    )
}

fn check_oracle_pg_vs_fd(_sizes: &CheckSizes) -> CheckOutcome {
    let mdp = MdpSpec::random(5, 5, 0.8, 0xfd);
    let theta = fixture_theta(25);
    let policy = SoftmaxPolicy::from_theta(&theta, 5, 5);
    let g = exact_pg_gradient(&mdp, &policy);
    let delta = 1e-5;
    let mut worst = 0.0f64;
    for i in 0..theta.len() {
        let mut plus = theta.clone();
        plus[i] += delta;
        let mut minus = theta.clone();
        minus[i] -= delta;
        let fd = (policy_loss(&mdp, &SoftmaxPolicy::from_theta(&plus, 5, 5))
            - policy_loss(&mdp, &SoftmaxPolicy::from_theta(&minus, 5, 5)))
            / (2.0 * delta);
        worst = worst.max((g[i] - fd).abs());
    }
    CheckOutcome::new(
        "oracle-pg-vs-fd",
        worst <= 1e-6,
        format!("max |grad - FD| = {worst:.2e} (tol 1e-6)"),
    )
}

fn check_oracle_occupancy_series(_sizes: &CheckSizes) -> CheckOutcome {
    let mdp = MdpSpec::random(3, 2, 0.8, 0x5e51e5);
    let policy = SoftmaxPolicy::from_theta(&fixture_theta(6), 3, 2);
    let solved = occupancy_solve(&mdp, &policy);
    let series = occupancy_series(&mdp, &policy, 200);
    let worst = solved
        .iter()
        .zip(&series)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let total: f64 = solved.iter().sum();
    CheckOutcome::new(
        "oracle-occupancy-series",
        worst <= 1e-8 && (total - 1.0).abs() <= 1e-10,
        format!("max |solve - series| = {worst:.2e}, sum = {total:.12}"),
    )
}

fn check_oracle_grid_optimum(_sizes: &CheckSizes) -> CheckOutcome {
    let quad = grid_optimum_1d(|x| (x - 3.0) * (x - 3.0), 0.0, 10.0, 0.1, false);
    let ok_quad = matches!(&quad, Ok(o) if (o.argmin[0] - 3.0).abs() < 1e-6 && o.min < 1e-10);
    let boundary = grid_optimum_1d(|x| x, 0.0, 1.0, 0.05, false).is_err();
    let params = QueueParams::default();
    let domain = Domain2 {
        lower: [params.mu_low, params.p_low],
        upper: [params.mu_high, params.p_high],
    };
    let queue_opt = grid_optimum_2d(
        |x| mm1_loss(x[0], x[1], &params).unwrap_or(f64::INFINITY),
        &domain,
        0.02,
        false,
    );
    let ok_queue = queue_opt.is_ok();
    let detail = match &queue_opt {
        Ok(o) => format!(
            "quadratic ok: {ok_quad}; boundary flagged: {boundary}; queue optimum ({:.4}, {:.4}) interior",
            o.argmin[0], o.argmin[1]
        ),
        Err(e) => format!("queue optimum failed: {e}"),
    };
    CheckOutcome::new("oracle-grid-optimum", ok_quad && boundary && ok_queue, detail)
}

fn check_fit_rate_synthetic(_sizes: &CheckSizes) -> CheckOutcome {
    let counts = log_checkpoints(100_000);
    let make = |f: &dyn Fn(f64) -> f64| LossCurve {
        mean_gap: counts.iter().map(|&t| f(t as f64)).collect(),
        stderr: vec![0.0; counts.len()],
        sample_counts: counts.clone(),
    };
    let f1 = fit_rate(&make(&|t| 7.0 / t), (100, 100_000)).unwrap();
    let f2 = fit_rate(&make(&|t| 3.0 / t.sqrt()), (100, 100_000)).unwrap();
    let f3 = fit_rate(&make(&|t| 5.0 / t * (1.0 + 0.1 * t.ln().sin())), (100, 100_000)).unwrap();
    let ok = (f1.slope + 1.0).abs() < 1e-9
        && (f1.r_squared - 1.0).abs() < 1e-9
        && (f2.slope + 0.5).abs() < 1e-9
        && f3.slope > -1.1
        && f3.slope < -0.9;
    CheckOutcome::new(
        "fit-rate-synthetic",
        ok,
        format!(
            "slopes: {:.3}, {:.3}, {:.3} (want -1, -0.5, [-1.1, -0.9])",
            f1.slope, f2.slope, f3.slope
        ),
    )
}
