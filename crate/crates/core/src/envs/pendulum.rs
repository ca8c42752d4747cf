use std::f64::consts::PI;

use rand::Rng as _;

use super::{Observation, StepResult};
use crate::rng::Rng;

/// Torques for the three discrete pendulum actions.
pub const DISCRETE_TORQUES: [f64; 3] = [-2.0, 0.0, 2.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumParams {
    pub g: f64,
    pub m: f64,
    pub l: f64,
    pub dt: f64,
    pub max_torque: f64,
    pub max_speed: f64,
    /// Episode time limit; `None` for the continuing task.
    pub max_steps: Option<usize>,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self {
            g: 10.0,
            m: 1.0,
            l: 1.0,
            dt: 0.05,
            max_torque: 2.0,
            max_speed: 8.0,
            max_steps: Some(200),
        }
    }
}

impl PendulumParams {
    pub fn continuing() -> Self {
        Self {
            max_steps: None,
            ..Self::default()
        }
    }

    /// Worst one-step reward: hanging down at full speed with full torque.
    pub fn min_reward(&self) -> f64 {
        -(PI * PI + 0.1 * self.max_speed * self.max_speed + 0.001 * self.max_torque * self.max_torque)
    }
}

/// Wrap an angle into [−π, π).
pub fn angle_normalize(theta: f64) -> f64 {
    (theta + PI).rem_euclid(2.0 * PI) - PI
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumTransition {
    pub theta: f64,
    pub theta_dot: f64,
    pub reward: f64,
}

/// One semi-implicit Euler step. The reward is charged on the pre-step state
/// and the clipped torque.
pub fn pendulum_step(theta: f64, theta_dot: f64, torque: f64, p: &PendulumParams) -> PendulumTransition {
    let u = torque.clamp(-p.max_torque, p.max_torque);
    let th = angle_normalize(theta);
    let reward = -(th * th + 0.1 * theta_dot * theta_dot + 0.001 * u * u);
    let accel = 3.0 * p.g / (2.0 * p.l) * theta.sin() + 3.0 * u / (p.m * p.l * p.l);
    let new_dot = (theta_dot + accel * p.dt).clamp(-p.max_speed, p.max_speed);
    let new_theta = angle_normalize(theta + new_dot * p.dt);
    PendulumTransition {
        theta: new_theta,
        theta_dot: new_dot,
        reward,
    }
}

#[derive(Debug, Clone)]
pub struct PendulumEnv {
    pub params: PendulumParams,
    pub theta: f64,
    pub theta_dot: f64,
    pub time: usize,
}

impl PendulumEnv {
    pub fn new(params: PendulumParams) -> Self {
        Self {
            params,
            theta: PI,
            theta_dot: 0.0,
            time: 0,
        }
    }

    /// θ ~ U(−π, π), θ̇ ~ U(−1, 1).
    pub fn reset(&mut self, rng: &mut Rng) -> Observation {
        self.theta = rng.random_range(-PI..PI);
        self.theta_dot = rng.random_range(-1.0..1.0);
        self.time = 0;
        self.observation()
    }

    /// `(cos θ, sin θ, θ̇)`
    pub fn observation(&self) -> Observation {
        Observation::Continuous(vec![self.theta.cos(), self.theta.sin(), self.theta_dot])
    }

    pub fn step(&mut self, torque: f64) -> StepResult {
        let out = pendulum_step(self.theta, self.theta_dot, torque, &self.params);
        self.theta = out.theta;
        self.theta_dot = out.theta_dot;
        self.time += 1;
        let truncated = self.params.max_steps.is_some_and(|m| self.time >= m);
        StepResult {
            next_observation: self.observation(),
            reward: out.reward,
            terminal: false,
            truncated,
        }
    }
}

/// Recover `(θ, θ̇)` from a `(cos θ, sin θ, θ̇)` observation.
pub fn pendulum_angle_state(obs: &[f64]) -> crate::Result<[f64; 2]> {
    crate::error::check_len("pendulum observation", 3, obs.len())?;
    Ok([obs[1].atan2(obs[0]), obs[2]])
}
