//! Desk-scale environments.
//!
//! Finite MDPs carry their full dynamics table so dynamic-programming oracles
//! can be run against them. The pendulum follows the classic swing-up
//! formulation with `θ = 0` upright.

mod mdp;
mod pendulum;

pub use mdp::{generate_random_mdp, mdp_step, ring_mdp, swap_chain, MdpEnv, MdpSpec};
pub use pendulum::{
    angle_normalize, pendulum_angle_state, pendulum_step, PendulumEnv, PendulumParams, PendulumTransition,
    DISCRETE_TORQUES,
};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// What an agent sees: a state id for finite MDPs, a real vector otherwise.
#[derive(Debug, Clone, PartialEq)]
pub enum Observation {
    Discrete(usize),
    Continuous(Vec<f64>),
}

impl Observation {
    pub fn as_discrete(&self) -> Result<usize> {
        match self {
            Observation::Discrete(s) => Ok(*s),
            Observation::Continuous(_) => {
                Err(Error::contract("expected a discrete observation, got a vector"))
            }
        }
    }

    pub fn as_continuous(&self) -> Result<&[f64]> {
        match self {
            Observation::Continuous(v) => Ok(v),
            Observation::Discrete(_) => {
                Err(Error::contract("expected a vector observation, got a state id"))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnvAction {
    Discrete(usize),
    Continuous(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub observation: Observation,
    pub time_in_episode: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_observation: Observation,
    pub reward: f64,
    /// True end of an episode: no bootstrapping past this transition.
    pub terminal: bool,
    /// Time-limit cut: the transition still bootstraps, but the episode resets.
    pub truncated: bool,
}

/// Environments the harness can drive.
#[derive(Debug, Clone)]
pub enum Environment {
    Mdp(MdpEnv),
    Pendulum(PendulumEnv),
}

impl Environment {
    pub fn reset(&mut self, rng: &mut Rng) -> Observation {
        match self {
            Environment::Mdp(env) => env.reset(rng),
            Environment::Pendulum(env) => env.reset(rng),
        }
    }

    pub fn step(&mut self, action: EnvAction, rng: &mut Rng) -> Result<StepResult> {
        match (self, action) {
            (Environment::Mdp(env), EnvAction::Discrete(a)) => env.step(a, rng),
            (Environment::Pendulum(env), EnvAction::Discrete(a)) => {
                let torque = *DISCRETE_TORQUES.get(a).ok_or(Error::OutOfRange {
                    what: "pendulum action",
                    index: a,
                    size: DISCRETE_TORQUES.len(),
                })?;
                Ok(env.step(torque))
            }
            (Environment::Pendulum(env), EnvAction::Continuous(u)) => Ok(env.step(u)),
            (Environment::Mdp(_), EnvAction::Continuous(_)) => {
                Err(Error::config("finite MDPs take discrete actions"))
            }
        }
    }

    pub fn state(&self) -> EnvState {
        match self {
            Environment::Mdp(env) => EnvState {
                observation: Observation::Discrete(env.state),
                time_in_episode: env.time,
            },
            Environment::Pendulum(env) => EnvState {
                observation: env.observation(),
                time_in_episode: env.time,
            },
        }
    }

    pub fn num_discrete_actions(&self) -> usize {
        match self {
            Environment::Mdp(env) => env.spec.num_actions,
            Environment::Pendulum(_) => DISCRETE_TORQUES.len(),
        }
    }

    /// Whether the task never ends on its own (required by differential learners).
    pub fn is_continuing(&self) -> bool {
        match self {
            Environment::Mdp(_) => true,
            Environment::Pendulum(env) => env.params.max_steps.is_none(),
        }
    }

    /// Smallest and largest one-step reward.
    pub fn reward_range(&self) -> (f64, f64) {
        match self {
            Environment::Mdp(env) => env.spec.reward_range(),
            Environment::Pendulum(env) => (env.params.min_reward(), 0.0),
        }
    }
}
