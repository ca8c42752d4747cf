//! Reference computations used to check the learners.
//!
//! Everything here works from the raw dynamics table and shares no
//! evaluation code with the learners it checks.

use rand::Rng as _;

use crate::envs::MdpSpec;
use crate::error::{Error, Result};
use crate::nn::ParamVector;
use crate::rng;

/// `π(a | s)` as one probability row per state.
pub type Policy = Vec<Vec<f64>>;

const VI_MAX_ITERS: usize = 1_000_000;
const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITERS: usize = 10_000_000;

fn expected_rewards(spec: &MdpSpec) -> Vec<Vec<f64>> {
    let k = spec.rewards.len();
    (0..spec.num_states)
        .map(|s| {
            (0..spec.num_actions)
                .map(|a| {
                    let row = spec.row(s, a);
                    row.iter().enumerate().map(|(i, p)| p * spec.rewards[i % k]).sum()
                })
                .collect()
        })
        .collect()
}

/// `P(s′ | s, a)` with rewards marginalised out.
fn next_state_probs(spec: &MdpSpec) -> Vec<Vec<Vec<f64>>> {
    let k = spec.rewards.len();
    (0..spec.num_states)
        .map(|s| {
            (0..spec.num_actions)
                .map(|a| {
                    let row = spec.row(s, a);
                    (0..spec.num_states)
                        .map(|s2| row[s2 * k..(s2 + 1) * k].iter().sum())
                        .collect()
                })
                .collect()
        })
        .collect()
}

fn bellman_optimality(spec: &MdpSpec, r: &[Vec<f64>], p: &[Vec<Vec<f64>>], q: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let v: Vec<f64> = q
        .iter()
        .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    (0..spec.num_states)
        .map(|s| {
            (0..spec.num_actions)
                .map(|a| r[s][a] + spec.gamma * p[s][a].iter().zip(&v).map(|(p, v)| p * v).sum::<f64>())
                .collect()
        })
        .collect()
}

fn sup_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Optimal action values `Q*[s][a]` with sup-norm Bellman residual below `tolerance`.
pub fn value_iteration(spec: &MdpSpec, tolerance: f64) -> Result<Vec<Vec<f64>>> {
    if !(spec.gamma < 1.0) {
        return Err(Error::config(
            "value iteration needs γ < 1; use the average-reward oracle for γ = 1",
        ));
    }
    if !(tolerance > 0.0) {
        return Err(Error::config("tolerance must be positive"));
    }
    let r = expected_rewards(spec);
    let p = next_state_probs(spec);
    let mut q = vec![vec![0.0; spec.num_actions]; spec.num_states];
    for _ in 0..VI_MAX_ITERS {
        let next = bellman_optimality(spec, &r, &p, &q);
        let residual = sup_diff(&next, &q);
        q = next;
        if residual < tolerance * (1.0 - spec.gamma) {
            return Ok(q);
        }
    }
    Err(Error::contract("value iteration did not converge"))
}

/// `max_{s,a} |(T Q)(s, a) − Q(s, a)|`
pub fn bellman_residual(spec: &MdpSpec, q: &[Vec<f64>]) -> f64 {
    let r = expected_rewards(spec);
    let p = next_state_probs(spec);
    sup_diff(&bellman_optimality(spec, &r, &p, q), q)
}

pub fn greedy_policy(spec: &MdpSpec, q: &[Vec<f64>]) -> Policy {
    q.iter()
        .map(|row| {
            let mut best = 0;
            for a in 1..row.len() {
                if row[a] > row[best] {
                    best = a;
                }
            }
            let mut pi = vec![0.0; spec.num_actions];
            pi[best] = 1.0;
            pi
        })
        .collect()
}

pub fn uniform_policy(spec: &MdpSpec) -> Policy {
    vec![vec![1.0 / spec.num_actions as f64; spec.num_actions]; spec.num_states]
}

fn validate_policy(spec: &MdpSpec, policy: &Policy) -> Result<()> {
    crate::error::check_len("policy rows", spec.num_states, policy.len())?;
    for row in policy {
        crate::error::check_len("policy row", spec.num_actions, row.len())?;
        let total: f64 = row.iter().sum();
        if (total - 1.0).abs() > 1e-9 || row.iter().any(|p| *p < 0.0) {
            return Err(Error::config("policy row is not a distribution"));
        }
    }
    Ok(())
}

fn policy_chain(spec: &MdpSpec, policy: &Policy) -> Vec<Vec<f64>> {
    let p = next_state_probs(spec);
    (0..spec.num_states)
        .map(|s| {
            (0..spec.num_states)
                .map(|s2| (0..spec.num_actions).map(|a| policy[s][a] * p[s][a][s2]).sum())
                .collect()
        })
        .collect()
}

/// True when some state can be reached from every state.
fn single_recurrent_class(chain: &[Vec<f64>]) -> bool {
    let n = chain.len();
    let reach_from = |start: usize| {
        let mut seen = vec![false; n];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(s) = stack.pop() {
            for s2 in 0..n {
                if chain[s][s2] > 0.0 && !seen[s2] {
                    seen[s2] = true;
                    stack.push(s2);
                }
            }
        }
        seen
    };
    let mut common = vec![true; n];
    for s in 0..n {
        for (c, r) in common.iter_mut().zip(reach_from(s)) {
            *c &= r;
        }
    }
    common.into_iter().any(|c| c)
}

/// Stationary distribution of the policy's chain via power iteration on
/// the lazy chain `½(P + I)`, which has the same fixed point and no period.
pub fn stationary_distribution(spec: &MdpSpec, policy: &Policy) -> Result<Vec<f64>> {
    validate_policy(spec, policy)?;
    let chain = policy_chain(spec, policy);
    if !single_recurrent_class(&chain) {
        return Err(Error::config("policy chain has more than one recurrent class"));
    }
    let n = spec.num_states;
    let mut d = vec![1.0 / n as f64; n];
    for _ in 0..POWER_MAX_ITERS {
        let mut next = vec![0.0; n];
        for s in 0..n {
            next[s] += 0.5 * d[s];
            for s2 in 0..n {
                next[s2] += 0.5 * d[s] * chain[s][s2];
            }
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        let change: f64 = next.iter().zip(&d).map(|(a, b)| (a - b).abs()).sum();
        d = next;
        if change < POWER_TOL {
            return Ok(d);
        }
    }
    Err(Error::contract("power iteration did not converge"))
}

/// Long-run average reward `Σ_s d(s) Σ_a π(a|s) E[R | s, a]`.
pub fn average_reward_oracle(spec: &MdpSpec, policy: &Policy) -> Result<f64> {
    let d = stationary_distribution(spec, policy)?;
    let r = expected_rewards(spec);
    Ok((0..spec.num_states)
        .map(|s| d[s] * (0..spec.num_actions).map(|a| policy[s][a] * r[s][a]).sum::<f64>())
        .sum())
}

/// Simulated average reward and its batch-means standard error.
pub fn monte_carlo_average_reward(
    spec: &MdpSpec,
    policy: &Policy,
    steps: usize,
    batches: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    validate_policy(spec, policy)?;
    if batches < 2 || steps < batches {
        return Err(Error::config("need at least two batches with one step each"));
    }
    let mut r = rng::from_seed(seed);
    let draw = |row: &[f64], u: f64| {
        let mut cum = 0.0;
        let mut last = 0;
        for (i, p) in row.iter().enumerate() {
            if *p > 0.0 {
                last = i;
                cum += p;
                if u < cum {
                    return i;
                }
            }
        }
        last
    };
    let k = spec.rewards.len();
    let per = steps / batches;
    let mut s = 0;
    let mut means = Vec::with_capacity(batches);
    for _ in 0..batches {
        let mut total = 0.0;
        for _ in 0..per {
            let a = draw(&policy[s], r.random());
            let outcome = draw(spec.row(s, a), r.random());
            total += spec.rewards[outcome % k];
            s = outcome / k;
        }
        means.push(total / per as f64);
    }
    let m = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (batches - 1) as f64;
    Ok((m, (var / batches as f64).sqrt()))
}

/// Central differences `(f(w + h e_i) − f(w − h e_i)) / 2h` per coordinate.
pub fn finite_diff_gradient<F>(f: F, params: &ParamVector, h: f64) -> Result<ParamVector>
where
    F: Fn(&ParamVector) -> f64,
{
    if !(h > 0.0) {
        return Err(Error::config("finite-difference step must be positive"));
    }
    let mut probe = params.clone();
    let mut grad = vec![0.0; params.len()];
    for i in 0..params.len() {
        let w = params.values()[i];
        probe.values_mut()[i] = w + h;
        let up = f(&probe);
        probe.values_mut()[i] = w - h;
        let down = f(&probe);
        probe.values_mut()[i] = w;
        grad[i] = (up - down) / (2.0 * h);
    }
    params.with_values(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{generate_random_mdp, swap_chain};

    fn single_state(reward: f64, gamma: f64) -> MdpSpec {
        MdpSpec::new(1, 1, vec![1.0], vec![reward], gamma, vec![1.0]).unwrap()
    }

    #[test]
    fn geometric_series() {
        let q = value_iteration(&single_state(1.0, 0.5), 1e-12).unwrap();
        assert!((q[0][0] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn zero_discount_is_expected_reward() {
        let mut spec = generate_random_mdp(3, 4, 2, false).unwrap();
        spec.gamma = 0.0;
        let q = value_iteration(&spec, 1e-12).unwrap();
        for s in 0..4 {
            for a in 0..2 {
                let want: f64 = (0..4)
                    .flat_map(|s2| (0..3).map(move |r| (s2, r)))
                    .map(|(s2, r)| spec.prob(s, a, s2, r) * spec.rewards[r])
                    .sum();
                assert!((q[s][a] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bellman_residual_after_convergence() {
        let spec = generate_random_mdp(11, 5, 3, true).unwrap();
        let q = value_iteration(&spec, 1e-11).unwrap();
        assert!(bellman_residual(&spec, &q) < 1e-9);
    }

    #[test]
    fn rejects_undiscounted() {
        assert!(value_iteration(&single_state(1.0, 1.0), 1e-9).unwrap_err().is_config());
    }

    #[test]
    fn swap_chain_is_half() {
        let spec = swap_chain();
        let r = average_reward_oracle(&spec, &uniform_policy(&spec)).unwrap();
        assert!((r - 0.5).abs() < 1e-12);
    }

    #[test]
    fn doubly_stochastic_uniform_policy() {
        // 3-state cyclic chain with a lazy step: doubly stochastic under both actions
        let n = 3;
        let k = 2;
        let mut t = vec![0.0; n * 2 * n * k];
        for s in 0..n {
            for a in 0..2 {
                let base = (s * 2 + a) * n * k;
                t[base + s * k + a] += 0.5;
                t[base + ((s + 1) % n) * k + (1 - a)] += 0.5;
            }
        }
        let spec = MdpSpec::new(n, 2, t, vec![0.2, -1.0], 0.9, vec![1.0, 0.0, 0.0]).unwrap();
        let r = average_reward_oracle(&spec, &uniform_policy(&spec)).unwrap();
        let mean_expected = 0.5 * (0.2 - 1.0);
        assert!((r - mean_expected).abs() < 1e-10);
    }

    #[test]
    fn rejects_multiple_recurrent_classes() {
        // two absorbing states
        let t = vec![1.0, 0.0, 0.0, 1.0];
        let spec = MdpSpec::new(2, 1, t, vec![0.0], 0.9, vec![0.5, 0.5]).unwrap();
        assert!(average_reward_oracle(&spec, &uniform_policy(&spec)).is_err());
    }

    #[test]
    fn monte_carlo_agrees() {
        let spec = generate_random_mdp(31, 6, 2, true).unwrap();
        let pi = uniform_policy(&spec);
        let exact = average_reward_oracle(&spec, &pi).unwrap();
        let (m, se) = monte_carlo_average_reward(&spec, &pi, 1_000_000, 100, 5).unwrap();
        assert!((m - exact).abs() <= 3.0 * se, "{m} vs {exact} (se {se})");
    }

    #[test]
    fn finite_differences() {
        let w = ParamVector::flat(vec![3.0]).unwrap();
        let g = finite_diff_gradient(|p| p.values()[0].powi(2), &w, 1e-5).unwrap();
        assert!((g.values()[0] - 6.0).abs() < 1e-6);
        let w = ParamVector::flat(vec![1.0, -2.0]).unwrap();
        for h in [1e-3, 0.5, 7.0] {
            let g = finite_diff_gradient(|p| 2.0 * p.values()[0] - 0.5 * p.values()[1], &w, h).unwrap();
            assert!((g.values()[0] - 2.0).abs() < 1e-12 && (g.values()[1] + 0.5).abs() < 1e-12);
        }
        assert!(finite_diff_gradient(|_| 0.0, &w, 0.0).is_err());
    }
}
