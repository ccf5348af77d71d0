//! Exact finite-MDP solvers: Bellman fixed points, occupancy measures, and
//! the assembled policy gradient.
//!
//! Everything here is deterministic linear algebra on small tables; these
//! are the reference values the sampling-based estimators are tested
//! against.

use nalgebra::{DMatrix, DVector};

use crate::env::rl::{MdpSpec, SoftmaxPolicy};

/// Which Bellman operator a solve targets.
pub enum EvalTarget<'a> {
    /// Fixed point of the policy operator `Q = c + gamma P (pi . Q)`.
    Policy(&'a SoftmaxPolicy),
    /// Fixed point of the optimality operator (greedy minimization).
    Greedy,
}

/// One Bellman sweep; returns the updated table and the sup-norm residual.
pub fn bellman_sweep(mdp: &MdpSpec, target: &EvalTarget, q: &[f64]) -> (Vec<f64>, f64) {
    let (ns, na) = (mdp.n_states, mdp.n_actions);
    // Backup value of each next state under the target operator.
    let mut next_value = vec![0.0; ns];
    for s in 0..ns {
        next_value[s] = match target {
            EvalTarget::Policy(policy) => {
                let pi = policy.probs(s);
                (0..na).map(|a| pi[a] * q[s * na + a]).sum()
            }
            EvalTarget::Greedy => (0..na)
                .map(|a| q[s * na + a])
                .fold(f64::INFINITY, f64::min),
        };
    }
    let mut out = vec![0.0; ns * na];
    let mut residual = 0.0f64;
    for s in 0..ns {
        for a in 0..na {
            let mut v = mdp.c[s][a];
            for (s2, &pr) in mdp.p[s][a].iter().enumerate() {
                v += mdp.gamma * pr * next_value[s2];
            }
            residual = residual.max((v - q[s * na + a]).abs());
            out[s * na + a] = v;
        }
    }
    (out, residual)
}

/// Iterate the Bellman operator to a sup-norm fixed-point tolerance.
///
/// The iteration count never exceeds the contraction bound
/// `ceil(log(tol (1-gamma) / (2M)) / log gamma)` for cost bound `M`.
pub fn value_iteration(mdp: &MdpSpec, target: EvalTarget, tol: f64) -> Vec<f64> {
    assert!(tol > 0.0);
    let m = mdp.cost_bound().max(f64::MIN_POSITIVE);
    let cap = ((tol * (1.0 - mdp.gamma) / (2.0 * m)).ln() / mdp.gamma.ln()).ceil() as i64;
    let cap = cap.max(1) as u64 + 1;
    let mut q = vec![0.0; mdp.n_states * mdp.n_actions];
    for _ in 0..cap {
        let (next, residual) = bellman_sweep(mdp, &target, &q);
        q = next;
        // Residual tol r gives fixed-point error r * gamma / (1 - gamma).
        if residual * mdp.gamma / (1.0 - mdp.gamma) <= tol {
            return q;
        }
    }
    q
}

/// Exact policy evaluation by linear solve:
/// `V = (I - gamma P_pi)^{-1} c_pi`, `Q = c + gamma P V`.
/// Returns `(q, v)`.
pub fn policy_eval_linear(mdp: &MdpSpec, policy: &SoftmaxPolicy) -> (Vec<f64>, Vec<f64>) {
    let (ns, na) = (mdp.n_states, mdp.n_actions);
    let probs = policy.prob_table();
    let mut p_pi = DMatrix::<f64>::zeros(ns, ns);
    let mut c_pi = DVector::<f64>::zeros(ns);
    for s in 0..ns {
        for a in 0..na {
            let pa = probs[s * na + a];
            c_pi[s] += pa * mdp.c[s][a];
            for (s2, &pr) in mdp.p[s][a].iter().enumerate() {
                p_pi[(s, s2)] += pa * pr;
            }
        }
    }
    let system = DMatrix::<f64>::identity(ns, ns) - mdp.gamma * p_pi;
    let v = system
        .lu()
        .solve(&c_pi)
        .expect("I - gamma P_pi is invertible for gamma < 1");
    let mut q = vec![0.0; ns * na];
    for s in 0..ns {
        for a in 0..na {
            let mut x = mdp.c[s][a];
            for (s2, &pr) in mdp.p[s][a].iter().enumerate() {
                x += mdp.gamma * pr * v[s2];
            }
            q[s * na + a] = x;
        }
    }
    (q, v.as_slice().to_vec())
}

/// Expected discounted cost of the softmax policy from the initial
/// distribution, evaluated exactly.
pub fn policy_loss(mdp: &MdpSpec, policy: &SoftmaxPolicy) -> f64 {
    let (_, v) = policy_eval_linear(mdp, policy);
    mdp.rho.iter().zip(&v).map(|(r, vi)| r * vi).sum()
}

/// Optimal discounted cost from the initial distribution: value iteration
/// locates the greedy policy, whose cost is then solved exactly.
pub fn optimal_loss(mdp: &MdpSpec, tol: f64) -> f64 {
    let (ns, na) = (mdp.n_states, mdp.n_actions);
    let q_star = value_iteration(mdp, EvalTarget::Greedy, tol);
    let greedy: Vec<usize> = (0..ns)
        .map(|s| {
            (0..na)
                .min_by(|&a, &b| {
                    q_star[s * na + a]
                        .partial_cmp(&q_star[s * na + b])
                        .unwrap()
                })
                .unwrap()
        })
        .collect();
    let mut p_g = DMatrix::<f64>::zeros(ns, ns);
    let mut c_g = DVector::<f64>::zeros(ns);
    for s in 0..ns {
        let a = greedy[s];
        c_g[s] = mdp.c[s][a];
        for (s2, &pr) in mdp.p[s][a].iter().enumerate() {
            p_g[(s, s2)] = pr;
        }
    }
    let system = DMatrix::<f64>::identity(ns, ns) - mdp.gamma * p_g;
    let v = system.lu().solve(&c_g).expect("greedy evaluation solve");
    mdp.rho.iter().zip(v.iter()).map(|(r, vi)| r * vi).sum()
}

/// Regeneration-augmented sampling kernel over state-action pairs,
/// `K[(s,a),(s',a')] = ((1-gamma) rho(s') + gamma P(s'|s,a)) pi(a'|s')`.
fn occupancy_kernel(mdp: &MdpSpec, probs: &[f64]) -> DMatrix<f64> {
    let (ns, na) = (mdp.n_states, mdp.n_actions);
    let n = ns * na;
    let mut k = DMatrix::<f64>::zeros(n, n);
    for s in 0..ns {
        for a in 0..na {
            let from = s * na + a;
            for s2 in 0..ns {
                let visit = (1.0 - mdp.gamma) * mdp.rho[s2] + mdp.gamma * mdp.p[s][a][s2];
                for a2 in 0..na {
                    k[(from, s2 * na + a2)] = visit * probs[s2 * na + a2];
                }
            }
        }
    }
    k
}

/// Stationary distribution of the sampling kernel: the probability-normalized
/// discounted state-action occupancy measure. Solves `nu' (I - K) = 0` with
/// the normalization `sum nu = 1`.
pub fn occupancy_solve(mdp: &MdpSpec, policy: &SoftmaxPolicy) -> Vec<f64> {
    let n = mdp.n_states * mdp.n_actions;
    let k = occupancy_kernel(mdp, &policy.prob_table());
    let mut system = k.transpose() - DMatrix::<f64>::identity(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for j in 0..n {
        system[(n - 1, j)] = 1.0;
    }
    rhs[n - 1] = 1.0;
    let nu = system
        .lu()
        .solve(&rhs)
        .expect("occupancy system is nonsingular for gamma < 1, rho > 0");
    let nu = nu.as_slice().to_vec();
    debug_assert!(nu.iter().all(|&x| x > -1e-12));
    debug_assert!((nu.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    nu
}

/// Truncated-series route to the same measure:
/// `(1-gamma) sum_{t<=t_max} gamma^t P(s_t = s, a_t = a)` under the policy.
pub fn occupancy_series(mdp: &MdpSpec, policy: &SoftmaxPolicy, t_max: usize) -> Vec<f64> {
    let (ns, na) = (mdp.n_states, mdp.n_actions);
    let probs = policy.prob_table();
    let mut x: Vec<f64> = (0..ns * na)
        .map(|i| mdp.rho[i / na] * probs[i])
        .collect();
    let mut acc = vec![0.0; ns * na];
    let mut discount = 1.0;
    for _ in 0..=t_max {
        for i in 0..ns * na {
            acc[i] += (1.0 - mdp.gamma) * discount * x[i];
        }
        // One step of the state-action marginal under P and pi.
        let mut next = vec![0.0; ns * na];
        for s in 0..ns {
            for a in 0..na {
                let mass = x[s * na + a];
                if mass == 0.0 {
                    continue;
                }
                for (s2, &pr) in mdp.p[s][a].iter().enumerate() {
                    for a2 in 0..na {
                        next[s2 * na + a2] += mass * pr * probs[s2 * na + a2];
                    }
                }
            }
        }
        x = next;
        discount *= mdp.gamma;
    }
    acc
}

/// Exact gradient of the discounted cost with respect to the softmax logits:
/// `(1/(1-gamma)) sum_{s,a} nu(s,a) Q(s,a) grad log pi(a|s)` with the
/// probability-normalized occupancy measure `nu`. The `1/(1-gamma)` factor
/// is certified against finite differences of the exactly evaluated loss.
pub fn exact_pg_gradient(mdp: &MdpSpec, policy: &SoftmaxPolicy) -> Vec<f64> {
    let g = stationary_pg_gradient(mdp, policy);
    g.into_iter().map(|x| x / (1.0 - mdp.gamma)).collect()
}

/// Mean of the actor-critic gradient estimator under the triad's stationary
/// law: `sum_{s,a} nu(s,a) Q(s,a) grad log pi(a|s)`, i.e. the exact gradient
/// scaled by `1 - gamma`.
pub fn stationary_pg_gradient(mdp: &MdpSpec, policy: &SoftmaxPolicy) -> Vec<f64> {
    let (ns, na) = (mdp.n_states, mdp.n_actions);
    let nu = occupancy_solve(mdp, policy);
    let (q, _) = policy_eval_linear(mdp, policy);
    let probs = policy.prob_table();
    let mut g = vec![0.0; ns * na];
    for s in 0..ns {
        let row = &probs[s * na..(s + 1) * na];
        for a in 0..na {
            let weight = nu[s * na + a] * q[s * na + a];
            if weight == 0.0 {
                continue;
            }
            for (j, &pj) in row.iter().enumerate() {
                let e = if j == a { 1.0 } else { 0.0 };
                g[s * na + j] += weight * (e - pj);
            }
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_chain(gamma: f64, cost: f64) -> MdpSpec {
        MdpSpec {
            n_states: 1,
            n_actions: 1,
            p: vec![vec![vec![1.0]]],
            c: vec![vec![cost]],
            rho: vec![1.0],
            gamma,
        }
    }

    #[test]
    fn value_iteration_geometric_sum() {
        let m = unit_chain(0.8, 1.0);
        let q = value_iteration(&m, EvalTarget::Greedy, 1e-10);
        assert!((q[0] - 5.0).abs() < 1e-9);
        let q = value_iteration(&m, EvalTarget::Policy(&SoftmaxPolicy::uniform(1, 1)), 1e-10);
        assert!((q[0] - 5.0).abs() < 1e-9);
    }

    #[test]
    fn zero_costs_give_zero_values() {
        let mut m = MdpSpec::random(4, 3, 0.9, 1);
        m.c = vec![vec![0.0; 3]; 4];
        let q = value_iteration(&m, EvalTarget::Greedy, 1e-12);
        assert!(q.iter().all(|&x| x == 0.0));
        let policy = SoftmaxPolicy::uniform(4, 3);
        assert_eq!(policy_loss(&m, &policy), 0.0);
        let g = exact_pg_gradient(&m, &policy);
        assert!(g.iter().all(|&x| x.abs() < 1e-14));
    }

    #[test]
    fn vi_agrees_with_linear_solve() {
        let m = MdpSpec::random(5, 5, 0.8, 21);
        let policy = SoftmaxPolicy::from_theta(
            &(0..25).map(|i| (i as f64 * 0.37).sin()).collect::<Vec<_>>(),
            5,
            5,
        );
        let q_vi = value_iteration(&m, EvalTarget::Policy(&policy), 1e-12);
        let (q_lin, _) = policy_eval_linear(&m, &policy);
        for (a, b) in q_vi.iter().zip(&q_lin) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn bellman_residual_contracts() {
        let m = MdpSpec::random(4, 4, 0.85, 33);
        let mut q = vec![0.0; 16];
        let mut prev: Option<f64> = None;
        for _ in 0..60 {
            let (next, residual) = bellman_sweep(&m, &EvalTarget::Greedy, &q);
            if let Some(p) = prev {
                assert!(residual <= m.gamma * p * (1.0 + 1e-9) + 1e-300);
            }
            prev = Some(residual);
            q = next;
        }
    }

    #[test]
    fn occupancy_degenerate_cases() {
        // Single state: nu(0, a) = pi(a | 0).
        let m = MdpSpec::random(1, 3, 0.7, 2);
        let policy = SoftmaxPolicy::from_theta(&[0.3, -0.2, 1.0], 1, 3);
        let nu = occupancy_solve(&m, &policy);
        let pi = policy.probs(0);
        for (a, b) in nu.iter().zip(&pi) {
            assert!((a - b).abs() < 1e-12);
        }

        // gamma ~ 0: nu(s, a) = rho(s) pi(a|s).
        let mut m = MdpSpec::random(3, 2, 0.5, 3);
        m.gamma = 1e-12;
        let policy = SoftmaxPolicy::from_theta(&[0.1, 0.5, -0.3, 0.2, 0.9, -0.8], 3, 2);
        let nu = occupancy_solve(&m, &policy);
        let probs = policy.prob_table();
        for s in 0..3 {
            for a in 0..2 {
                let want = m.rho[s] * probs[s * 2 + a];
                assert!((nu[s * 2 + a] - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn occupancy_solve_matches_series() {
        let m = MdpSpec::random(3, 2, 0.8, 17);
        let policy = SoftmaxPolicy::from_theta(&[0.4, -0.1, 0.0, 0.7, -0.5, 0.2], 3, 2);
        let solved = occupancy_solve(&m, &policy);
        let series = occupancy_series(&m, &policy, 200);
        for (a, b) in solved.iter().zip(&series) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
        let total: f64 = solved.iter().sum();
        assert!((total - 1.0).abs() < 1e-10);
        assert!(solved.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn bandit_gradient_pattern() {
        // One state, two actions, gamma -> 0: loss is sum_a pi(a) c(a) and
        // its logit gradient is pi0 pi1 (c0 - c1, c1 - c0).
        let m = MdpSpec {
            n_states: 1,
            n_actions: 2,
            p: vec![vec![vec![1.0], vec![1.0]]],
            c: vec![vec![0.0, 1.0]],
            rho: vec![1.0],
            gamma: 1e-12,
        };
        let policy = SoftmaxPolicy::from_theta(&[0.3, -0.4], 1, 2);
        let pi = policy.probs(0);
        let g = exact_pg_gradient(&m, &policy);
        let want0 = pi[0] * pi[1] * (m.c[0][0] - m.c[0][1]);
        assert!((g[0] - want0).abs() < 1e-9, "{} vs {}", g[0], want0);
        assert!((g[1] + want0).abs() < 1e-9);
    }

    #[test]
    fn exact_gradient_matches_finite_differences() {
        let m = MdpSpec::random(5, 5, 0.8, 99);
        let theta: Vec<f64> = (0..25).map(|i| 0.3 * ((i * 7 % 11) as f64 - 5.0) / 5.0).collect();
        let policy = SoftmaxPolicy::from_theta(&theta, 5, 5);
        let g = exact_pg_gradient(&m, &policy);
        let delta = 1e-5;
        for i in 0..theta.len() {
            let mut plus = theta.clone();
            plus[i] += delta;
            let mut minus = theta.clone();
            minus[i] -= delta;
            let fd = (policy_loss(&m, &SoftmaxPolicy::from_theta(&plus, 5, 5))
                - policy_loss(&m, &SoftmaxPolicy::from_theta(&minus, 5, 5)))
                / (2.0 * delta);
            assert!(
                (g[i] - fd).abs() < 1e-6,
                "coordinate {i}: exact {} vs fd {}",
                g[i],
                fd
            );
        }
    }

    #[test]
    fn optimal_loss_bounds_policy_loss() {
        let m = MdpSpec::random(5, 5, 0.8, 5);
        let l_star = optimal_loss(&m, 1e-10);
        let uniform = policy_loss(&m, &SoftmaxPolicy::uniform(5, 5));
        assert!(l_star <= uniform + 1e-12);
        assert!(l_star > 0.0);
    }
}
