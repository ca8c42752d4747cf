use rand::Rng as _;

use super::{Observation, StepResult};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

/// Reward levels per generated MDP.
const RANDOM_REWARD_LEVELS: usize = 3;
/// Mass floor that keeps generated MDPs in a single recurrent class.
const ERGODIC_FLOOR: f64 = 0.01;

/// Exact finite-MDP dynamics `p(s′, r | s, a)`.
///
/// `transition` is stored row-major over `(s, a, s′, r_index)`, so the row
/// for `(s, a)` is a contiguous block of `num_states · rewards.len()` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpSpec {
    pub num_states: usize,
    pub num_actions: usize,
    pub transition: Vec<f64>,
    pub rewards: Vec<f64>,
    pub gamma: f64,
    pub start_distribution: Vec<f64>,
}

impl MdpSpec {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        transition: Vec<f64>,
        rewards: Vec<f64>,
        gamma: f64,
        start_distribution: Vec<f64>,
    ) -> Result<Self> {
        let spec = Self {
            num_states,
            num_actions,
            transition,
            rewards,
            gamma,
            start_distribution,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_states == 0 || self.num_actions == 0 || self.rewards.is_empty() {
            return Err(Error::config("MDP needs states, actions and reward levels"));
        }
        crate::error::check_len(
            "MDP transition table",
            self.num_states * self.num_actions * self.row_len(),
            self.transition.len(),
        )?;
        crate::error::check_len("MDP start distribution", self.num_states, self.start_distribution.len())?;
        if self.rewards.iter().any(|r| !r.is_finite()) {
            return Err(Error::NonFinite("MDP rewards"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config(format!("gamma must lie in [0, 1], got {}", self.gamma)));
        }
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                let row = self.row(s, a);
                if row.iter().any(|p| !(*p >= 0.0)) {
                    return Err(Error::config(format!("negative probability in row ({s}, {a})")));
                }
                let total: f64 = row.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::config(format!("row ({s}, {a}) sums to {total}")));
                }
            }
        }
        let total: f64 = self.start_distribution.iter().sum();
        if (total - 1.0).abs() > 1e-12 || self.start_distribution.iter().any(|p| *p < 0.0) {
            return Err(Error::config("start distribution is not a probability vector"));
        }
        Ok(())
    }

    pub fn num_rewards(&self) -> usize {
        self.rewards.len()
    }

    fn row_len(&self) -> usize {
        self.num_states * self.rewards.len()
    }

    /// Outcome probabilities for `(s, a)`, indexed by `s′ · num_rewards + r_index`.
    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let len = self.row_len();
        let start = (s * self.num_actions + a) * len;
        &self.transition[start..start + len]
    }

    pub fn prob(&self, s: usize, a: usize, next: usize, reward_index: usize) -> f64 {
        self.row(s, a)[next * self.num_rewards() + reward_index]
    }

    pub fn reward_range(&self) -> (f64, f64) {
        self.rewards
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| (lo.min(r), hi.max(r)))
    }

    fn check_ids(&self, s: usize, a: usize) -> Result<()> {
        if s >= self.num_states {
            return Err(Error::OutOfRange {
                what: "state id",
                index: s,
                size: self.num_states,
            });
        }
        if a >= self.num_actions {
            return Err(Error::OutOfRange {
                what: "action id",
                index: a,
                size: self.num_actions,
            });
        }
        Ok(())
    }
}

fn normalize(row: &mut [f64]) {
    let total: f64 = row.iter().sum();
    for p in row.iter_mut() {
        *p /= total;
    }
}

/// Random MDP with Dirichlet(1) outcome rows (normalized exponential draws),
/// `RANDOM_REWARD_LEVELS` reward levels uniform in [−1, 1], γ = 0.9 and a
/// uniform start distribution.
///
/// With `ergodic`, each row is mixed with a uniform floor so every entry is
/// at least `0.01 / num_states`, which makes every policy's chain irreducible.
pub fn generate_random_mdp(
    seed: u64,
    num_states: usize,
    num_actions: usize,
    ergodic: bool,
) -> Result<MdpSpec> {
    if num_states < 2 || num_actions < 2 {
        return Err(Error::config("random MDPs need at least 2 states and 2 actions"));
    }
    let mut r = rng::from_seed(seed);
    let k = RANDOM_REWARD_LEVELS;
    let rewards: Vec<f64> = (0..k).map(|_| r.random_range(-1.0..=1.0)).collect();
    let row_len = num_states * k;
    let mut transition = Vec::with_capacity(num_states * num_actions * row_len);
    for _ in 0..num_states * num_actions {
        let mut row: Vec<f64> = (0..row_len)
            .map(|_| -(1.0 - r.random::<f64>()).ln())
            .collect();
        normalize(&mut row);
        if ergodic {
            let floor = ERGODIC_FLOOR / num_states as f64;
            let keep = 1.0 - floor * row_len as f64;
            for p in row.iter_mut() {
                *p = keep * *p + floor;
            }
            normalize(&mut row);
        }
        transition.extend(row);
    }
    let start = vec![1.0 / num_states as f64; num_states];
    MdpSpec::new(num_states, num_actions, transition, rewards, 0.9, start)
}

/// Two states that always swap; leaving state 1 pays 1, leaving state 0 pays 0.
/// Both actions behave identically. Periodic with long-run average reward 0.5.
pub fn swap_chain() -> MdpSpec {
    // outcome index = s′ · 2 + r_index, rewards = [0, 1]
    let from0 = [0.0, 0.0, 1.0, 0.0];
    let from1 = [0.0, 1.0, 0.0, 0.0];
    let transition = [from0, from0, from1, from1].concat();
    MdpSpec::new(2, 2, transition, vec![0.0, 1.0], 0.9, vec![1.0, 0.0])
        .expect("swap chain is well formed")
}

/// `n` states on a ring. Action 0 advances with probability `advance_prob`
/// (otherwise stays); action 1 stays with probability `advance_prob`
/// (otherwise advances). Wrapping from `n−1` to `0` pays 1, everything else 0.
///
/// Always advancing gives average reward `advance_prob / n`.
pub fn ring_mdp(n: usize, advance_prob: f64) -> Result<MdpSpec> {
    if n < 2 || !(0.0..=1.0).contains(&advance_prob) {
        return Err(Error::config("ring MDP needs n ≥ 2 and a probability"));
    }
    let k = 2;
    let mut transition = vec![0.0; n * 2 * n * k];
    for s in 0..n {
        let next = (s + 1) % n;
        let pay = if next == 0 { 1 } else { 0 };
        for (a, p_move) in [(0, advance_prob), (1, 1.0 - advance_prob)] {
            let base = (s * 2 + a) * n * k;
            transition[base + s * k] += 1.0 - p_move;
            transition[base + next * k + pay] += p_move;
        }
    }
    let mut start = vec![0.0; n];
    start[0] = 1.0;
    MdpSpec::new(n, 2, transition, vec![0.0, 1.0], 0.9, start)
}

/// Sample `(s′, r)` by inverse CDF on a single uniform draw.
pub fn mdp_step(spec: &MdpSpec, state: usize, action: usize, rng: &mut Rng) -> Result<StepResult> {
    spec.check_ids(state, action)?;
    let row = spec.row(state, action);
    let u: f64 = rng.random();
    let mut cum = 0.0;
    let mut pick = None;
    for (i, &p) in row.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        cum += p;
        pick = Some(i);
        if u < cum {
            break;
        }
    }
    // rounding can leave the last positive outcome as the fallback
    let idx = pick.expect("rows sum to one");
    let k = spec.num_rewards();
    Ok(StepResult {
        next_observation: Observation::Discrete(idx / k),
        reward: spec.rewards[idx % k],
        terminal: false,
        truncated: false,
    })
}

/// A running finite MDP. Continuing: never terminal, never truncated.
#[derive(Debug, Clone)]
pub struct MdpEnv {
    pub spec: MdpSpec,
    pub state: usize,
    pub time: usize,
}

impl MdpEnv {
    pub fn new(spec: MdpSpec) -> Self {
        Self {
            spec,
            state: 0,
            time: 0,
        }
    }

    pub fn reset(&mut self, rng: &mut Rng) -> Observation {
        let u: f64 = rng.random();
        let mut cum = 0.0;
        let mut state = self.spec.num_states - 1;
        for (s, p) in self.spec.start_distribution.iter().enumerate() {
            cum += p;
            if u < cum {
                state = s;
                break;
            }
        }
        self.state = state;
        self.time = 0;
        Observation::Discrete(state)
    }

    pub fn step(&mut self, action: usize, rng: &mut Rng) -> Result<StepResult> {
        let out = mdp_step(&self.spec, self.state, action, rng)?;
        self.state = out.next_observation.as_discrete()?;
        self.time += 1;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let a = generate_random_mdp(42, 5, 3, true).unwrap();
        let b = generate_random_mdp(42, 5, 3, true).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_random_mdp(43, 5, 3, true).unwrap());
    }

    #[test]
    fn rows_are_distributions() {
        for seed in 0..100 {
            let spec = generate_random_mdp(seed, 4, 2, seed % 2 == 0).unwrap();
            for s in 0..4 {
                for a in 0..2 {
                    let total: f64 = spec.row(s, a).iter().sum();
                    assert!((total - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn ergodic_floor_holds() {
        let spec = generate_random_mdp(7, 6, 2, true).unwrap();
        let floor = 0.01 / 6.0;
        assert!(spec.transition.iter().all(|&p| p >= floor * (1.0 - 1e-12)));
    }

    #[test]
    fn ergodic_policies_visit_every_state() {
        // power iteration on the uniform-policy chain, independent of the oracle module
        let spec = generate_random_mdp(21, 6, 3, true).unwrap();
        let n = spec.num_states;
        let mut p = vec![vec![0.0; n]; n];
        for s in 0..n {
            for a in 0..spec.num_actions {
                for s2 in 0..n {
                    for r in 0..spec.num_rewards() {
                        p[s][s2] += spec.prob(s, a, s2, r) / spec.num_actions as f64;
                    }
                }
            }
        }
        let mut d = vec![1.0 / n as f64; n];
        for _ in 0..10_000 {
            let mut nd = vec![0.0; n];
            for s in 0..n {
                for s2 in 0..n {
                    nd[s2] += d[s] * p[s][s2];
                }
            }
            d = nd;
        }
        assert!(d.iter().all(|&x| x > 0.0), "{d:?}");
    }

    #[test]
    fn rejects_tiny_sizes() {
        assert!(generate_random_mdp(0, 1, 2, true).is_err());
        assert!(generate_random_mdp(0, 2, 1, false).is_err());
    }

    #[test]
    fn deterministic_row_always_lands() {
        let spec = swap_chain();
        let mut r = rng::from_seed(1);
        for _ in 0..1000 {
            let out = mdp_step(&spec, 0, 1, &mut r).unwrap();
            assert_eq!(out.next_observation, Observation::Discrete(1));
            assert_eq!(out.reward, 0.0);
        }
    }

    #[test]
    fn empirical_frequencies_match_table() {
        let spec = generate_random_mdp(5, 3, 2, false).unwrap();
        let mut r = rng::from_seed(99);
        let n = 100_000;
        let k = spec.num_rewards();
        let mut counts = vec![0usize; spec.num_states * k];
        for _ in 0..n {
            let out = mdp_step(&spec, 1, 0, &mut r).unwrap();
            let s2 = out.next_observation.as_discrete().unwrap();
            let ri = spec.rewards.iter().position(|&x| x == out.reward).unwrap();
            counts[s2 * k + ri] += 1;
        }
        for (i, &c) in counts.iter().enumerate() {
            let p = spec.row(1, 0)[i];
            let sigma = (n as f64 * p * (1.0 - p)).sqrt();
            assert!((c as f64 - n as f64 * p).abs() <= 3.0 * sigma + 1e-9, "outcome {i}");
        }
    }

    #[test]
    fn swap_chain_average_reward_is_half() {
        let mut env = MdpEnv::new(swap_chain());
        let mut r = rng::from_seed(3);
        env.reset(&mut r);
        let total: f64 = (0..10_000).map(|t| env.step(t % 2, &mut r).unwrap().reward).sum();
        assert!((total / 10_000.0 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ring_layout() {
        let spec = ring_mdp(4, 0.9).unwrap();
        // from the last state, advancing wraps to 0 and pays 1
        assert!((spec.prob(3, 0, 0, 1) - 0.9).abs() < 1e-15);
        assert!((spec.prob(3, 0, 3, 0) - 0.1).abs() < 1e-15);
        assert!((spec.prob(1, 1, 1, 0) - 0.9).abs() < 1e-15);
        assert!((spec.prob(1, 1, 2, 0) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn out_of_range_ids() {
        let spec = swap_chain();
        let mut r = rng::from_seed(0);
        assert!(mdp_step(&spec, 2, 0, &mut r).is_err());
        assert!(mdp_step(&spec, 0, 2, &mut r).is_err());
    }
}
