use std::f64::consts::{LN_2, PI};

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tderr::argmax;

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicySpec {
    EpsilonGreedy {
        epsilon: f64,
    },
    /// Gaussian on a pre-activation, squashed by tanh and scaled to ±max_action.
    SquashedGaussian {
        log_std_min: f64,
        log_std_max: f64,
        max_action: f64,
    },
}

impl PolicySpec {
    pub fn epsilon_greedy(epsilon: f64) -> Result<Self> {
        let p = PolicySpec::EpsilonGreedy { epsilon };
        p.validate()?;
        Ok(p)
    }

    pub fn squashed_gaussian(max_action: f64) -> Result<Self> {
        let p = PolicySpec::SquashedGaussian {
            log_std_min: LOG_STD_MIN,
            log_std_max: LOG_STD_MAX,
            max_action,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PolicySpec::EpsilonGreedy { epsilon } if !(0.0..=1.0).contains(&epsilon) => {
                Err(Error::config(format!("epsilon must lie in [0, 1], got {epsilon}")))
            }
            PolicySpec::SquashedGaussian {
                log_std_min,
                log_std_max,
                max_action,
            } if !(log_std_min < log_std_max && max_action > 0.0) => Err(Error::config(
                "squashed Gaussian needs log_std_min < log_std_max and max_action > 0",
            )),
            _ => Ok(()),
        }
    }
}

/// With probability ε a uniform action, otherwise the greedy one (ties low).
pub fn epsilon_greedy(values: &[f64], epsilon: f64, rng: &mut Rng) -> usize {
    if rng.random::<f64>() < epsilon {
        rng.random_range(0..values.len())
    } else {
        argmax(values)
    }
}

/// `softplus(y) = ln(1 + eʸ)` without overflow.
fn softplus(y: f64) -> f64 {
    y.max(0.0) + (-y.abs()).exp().ln_1p()
}

/// `ln(1 − tanh²x)` computed as `2(ln 2 − x − softplus(−2x))`.
pub fn log_one_minus_tanh_sq(x: f64) -> f64 {
    2.0 * (LN_2 - x - softplus(-2.0 * x))
}

/// Log-density of `a = max_action · tanh(x)` where `x ~ N(mean, e^{2·log_std})`.
pub fn squashed_gaussian_log_prob(pre_tanh: f64, mean: f64, log_std: f64, max_action: f64) -> f64 {
    let z = (pre_tanh - mean) / log_std.exp();
    -0.5 * z * z - log_std - 0.5 * (2.0 * PI).ln() - max_action.ln() - log_one_minus_tanh_sq(pre_tanh)
}

/// `∂ ln π / ∂(mean, raw log-std)` for a fixed pre-activation sample. The
/// log-std derivative is zero where the clamp is active.
pub fn squashed_gaussian_grad(pre_tanh: f64, mean: f64, raw_log_std: f64, log_std_min: f64, log_std_max: f64) -> (f64, f64) {
    let log_std = raw_log_std.clamp(log_std_min, log_std_max);
    let var = (2.0 * log_std).exp();
    let d = pre_tanh - mean;
    let d_mean = d / var;
    let d_log_std = if raw_log_std < log_std_min || raw_log_std > log_std_max {
        0.0
    } else {
        d * d / var - 1.0
    };
    (d_mean, d_log_std)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquashedSample {
    pub action: f64,
    pub pre_tanh: f64,
    pub log_prob: f64,
    pub mean: f64,
    /// After clamping.
    pub log_std: f64,
}

/// What a policy acts on: action values or Gaussian head outputs.
#[derive(Debug, Clone, Copy)]
pub enum ActionSource<'a> {
    Values(&'a [f64]),
    Gaussian { mean: f64, raw_log_std: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Action {
    Discrete(usize),
    Continuous(SquashedSample),
}

pub fn select_action(policy: &PolicySpec, source: ActionSource<'_>, rng: &mut Rng) -> Result<Action> {
    match (*policy, source) {
        (PolicySpec::EpsilonGreedy { epsilon }, ActionSource::Values(values)) => {
            if values.is_empty() {
                return Err(Error::contract("no actions to choose from"));
            }
            Ok(Action::Discrete(epsilon_greedy(values, epsilon, rng)))
        }
        (
            PolicySpec::SquashedGaussian {
                log_std_min,
                log_std_max,
                max_action,
            },
            ActionSource::Gaussian { mean, raw_log_std },
        ) => {
            let log_std = raw_log_std.clamp(log_std_min, log_std_max);
            let xi: f64 = rng.sample(StandardNormal);
            let pre_tanh = mean + log_std.exp() * xi;
            Ok(Action::Continuous(SquashedSample {
                action: max_action * pre_tanh.tanh(),
                pre_tanh,
                log_prob: squashed_gaussian_log_prob(pre_tanh, mean, log_std, max_action),
                mean,
                log_std,
            }))
        }
        _ => Err(Error::config("policy kind does not match the action source")),
    }
}
