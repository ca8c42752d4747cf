use std::f64::consts::PI;

use crate::envs::{pendulum_angle_state, Observation};
use crate::error::{check_len, Error, Result};
use crate::features::{one_hot_encode, tile_encode, FeatureVector, TileCodingSpec};
use crate::nn::MlpSpec;
use crate::tderr::{Differentiable, ValueFn};

/// Maps observations to table rows.
#[derive(Debug, Clone, PartialEq)]
pub enum StateIndexer {
    /// Finite-MDP state ids used as-is.
    Identity { num_states: usize },
    /// Uniform grid over pendulum angle in [−π, π] and clipped angular velocity.
    PendulumGrid {
        theta_bins: usize,
        speed_bins: usize,
        max_speed: f64,
    },
}

impl StateIndexer {
    pub fn num_states(&self) -> usize {
        match *self {
            StateIndexer::Identity { num_states } => num_states,
            StateIndexer::PendulumGrid {
                theta_bins,
                speed_bins,
                ..
            } => theta_bins * speed_bins,
        }
    }

    pub fn index(&self, obs: &Observation) -> Result<usize> {
        match *self {
            StateIndexer::Identity { num_states } => {
                let s = obs.as_discrete()?;
                if s >= num_states {
                    return Err(Error::OutOfRange {
                        what: "state id",
                        index: s,
                        size: num_states,
                    });
                }
                Ok(s)
            }
            StateIndexer::PendulumGrid {
                theta_bins,
                speed_bins,
                max_speed,
            } => {
                let [theta, speed] = pendulum_angle_state(obs.as_continuous()?)?;
                let bin = |u: f64, n: usize| ((u * n as f64).floor() as usize).min(n - 1);
                let i = bin((theta + PI) / (2.0 * PI), theta_bins);
                let j = bin((speed.clamp(-max_speed, max_speed) + max_speed) / (2.0 * max_speed), speed_bins);
                Ok(i * speed_bins + j)
            }
        }
    }
}

/// Lookup-table action values.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularQ {
    pub indexer: StateIndexer,
    pub num_actions: usize,
    /// Row-major `[state][action]`.
    pub table: Vec<f64>,
}

impl TabularQ {
    pub fn new(indexer: StateIndexer, num_actions: usize, initial: f64) -> Result<Self> {
        let n = indexer.num_states();
        if n == 0 || num_actions == 0 {
            return Err(Error::config("table needs at least one state and action"));
        }
        if !initial.is_finite() {
            return Err(Error::NonFinite("initial table value"));
        }
        Ok(Self {
            indexer,
            num_actions,
            table: vec![initial; n * num_actions],
        })
    }

    pub fn slot(&self, obs: &Observation, action: usize) -> Result<usize> {
        if action >= self.num_actions {
            return Err(Error::OutOfRange {
                what: "action id",
                index: action,
                size: self.num_actions,
            });
        }
        Ok(self.indexer.index(obs)? * self.num_actions + action)
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.table[s * self.num_actions + a]
    }
}

impl ValueFn for TabularQ {
    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn params(&self) -> &[f64] {
        &self.table
    }

    fn action_values_with(&self, params: &[f64], obs: &Observation) -> Result<Vec<f64>> {
        let s = self.indexer.index(obs)?;
        Ok(params[s * self.num_actions..(s + 1) * self.num_actions].to_vec())
    }

    fn evaluate_with(&self, params: &[f64], obs: &Observation, action: usize) -> Result<f64> {
        Ok(params[self.slot(obs, action)?])
    }
}

impl Differentiable for TabularQ {
    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.table
    }

    fn accumulate_gradient(&self, obs: &Observation, action: usize, scale: f64, grad: &mut [f64]) -> Result<()> {
        check_len("gradient buffer", self.table.len(), grad.len())?;
        grad[self.slot(obs, action)?] += scale;
        Ok(())
    }
}

/// State-action feature maps for linear learners.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureEncoder {
    OneHot { num_states: usize, num_actions: usize },
    /// Tile coding over the raw observation vector.
    Tiles(TileCodingSpec),
    /// Tile coding over the pendulum's `(θ, θ̇)`, recovered from `(cos θ, sin θ, θ̇)`.
    PendulumTiles(TileCodingSpec),
}

impl FeatureEncoder {
    /// Tiles over θ ∈ [−π, π] and θ̇ ∈ [−8, 8].
    pub fn pendulum_tiles(num_tilings: usize, tiles_per_dim: usize, num_actions: usize, normalize: bool) -> Result<Self> {
        let spec = TileCodingSpec {
            num_tilings,
            tiles_per_dim,
            state_low: vec![-PI, -8.0],
            state_high: vec![PI, 8.0],
            num_actions,
            normalize,
        };
        spec.validate()?;
        Ok(FeatureEncoder::PendulumTiles(spec))
    }

    pub fn dim(&self) -> usize {
        match self {
            FeatureEncoder::OneHot {
                num_states,
                num_actions,
            } => num_states * num_actions,
            FeatureEncoder::Tiles(spec) | FeatureEncoder::PendulumTiles(spec) => spec.dim(),
        }
    }

    pub fn num_actions(&self) -> usize {
        match self {
            FeatureEncoder::OneHot { num_actions, .. } => *num_actions,
            FeatureEncoder::Tiles(spec) | FeatureEncoder::PendulumTiles(spec) => spec.num_actions,
        }
    }

    pub fn encode(&self, obs: &Observation, action: usize) -> Result<FeatureVector> {
        match self {
            FeatureEncoder::OneHot {
                num_states,
                num_actions,
            } => one_hot_encode(obs.as_discrete()?, action, *num_states, *num_actions),
            FeatureEncoder::Tiles(spec) => tile_encode(spec, obs.as_continuous()?, action),
            FeatureEncoder::PendulumTiles(spec) => {
                tile_encode(spec, &pendulum_angle_state(obs.as_continuous()?)?, action)
            }
        }
    }
}

/// `Q(s, a) = wᵀ x(s, a)`
#[derive(Debug, Clone, PartialEq)]
pub struct LinearQ {
    pub encoder: FeatureEncoder,
    pub weights: Vec<f64>,
}

impl LinearQ {
    pub fn new(encoder: FeatureEncoder, initial: f64) -> Self {
        let dim = encoder.dim();
        Self {
            encoder,
            weights: vec![initial; dim],
        }
    }

    pub fn features(&self, obs: &Observation, action: usize) -> Result<FeatureVector> {
        self.encoder.encode(obs, action)
    }
}

impl ValueFn for LinearQ {
    fn num_actions(&self) -> usize {
        self.encoder.num_actions()
    }

    fn params(&self) -> &[f64] {
        &self.weights
    }

    fn action_values_with(&self, params: &[f64], obs: &Observation) -> Result<Vec<f64>> {
        (0..self.num_actions())
            .map(|a| self.evaluate_with(params, obs, a))
            .collect()
    }

    fn evaluate_with(&self, params: &[f64], obs: &Observation, action: usize) -> Result<f64> {
        check_len("linear weights", self.weights.len(), params.len())?;
        Ok(self.features(obs, action)?.dot_dense(params))
    }
}

impl Differentiable for LinearQ {
    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    fn accumulate_gradient(&self, obs: &Observation, action: usize, scale: f64, grad: &mut [f64]) -> Result<()> {
        check_len("gradient buffer", self.weights.len(), grad.len())?;
        let x = self.features(obs, action)?;
        for (i, v) in x.indices.iter().zip(&x.values) {
            grad[*i] += scale * v;
        }
        Ok(())
    }
}

/// How observations become network inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputMap {
    Raw,
    /// Discrete state ids as one-hot vectors of this length.
    OneHot(usize),
}

impl InputMap {
    fn apply(&self, obs: &Observation) -> Result<Vec<f64>> {
        match *self {
            InputMap::Raw => Ok(obs.as_continuous()?.to_vec()),
            InputMap::OneHot(n) => {
                let s = obs.as_discrete()?;
                if s >= n {
                    return Err(Error::OutOfRange {
                        what: "state id",
                        index: s,
                        size: n,
                    });
                }
                let mut x = vec![0.0; n];
                x[s] = 1.0;
                Ok(x)
            }
        }
    }
}

/// One network output per action.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpQ {
    pub spec: MlpSpec,
    pub params: Vec<f64>,
    pub input: InputMap,
}

impl MlpQ {
    pub fn new(spec: MlpSpec, params: Vec<f64>, input: InputMap) -> Result<Self> {
        check_len("MLP parameters", spec.param_count(), params.len())?;
        if let InputMap::OneHot(n) = input {
            check_len("MLP input", spec.input_dim, n)?;
        }
        Ok(Self { spec, params, input })
    }
}

impl ValueFn for MlpQ {
    fn num_actions(&self) -> usize {
        self.spec.output_dim
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn action_values_with(&self, params: &[f64], obs: &Observation) -> Result<Vec<f64>> {
        self.spec.forward(params, &self.input.apply(obs)?)
    }
}

impl Differentiable for MlpQ {
    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn accumulate_gradient(&self, obs: &Observation, action: usize, scale: f64, grad: &mut [f64]) -> Result<()> {
        if action >= self.spec.output_dim {
            return Err(Error::OutOfRange {
                what: "action id",
                index: action,
                size: self.spec.output_dim,
            });
        }
        let mut cot = vec![0.0; self.spec.output_dim];
        cot[action] = 1.0;
        self.spec
            .backward(&self.params, &self.input.apply(obs)?, &cot, scale, grad)
            .map(|_| ())
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `Q(s, a) = σ(wᵀ x(s, a))` with the logistic σ: linear features plus one
/// nonlinearity.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmoidLinearQ {
    pub encoder: FeatureEncoder,
    pub weights: Vec<f64>,
}

impl SigmoidLinearQ {
    pub fn new(encoder: FeatureEncoder) -> Self {
        let dim = encoder.dim();
        Self {
            encoder,
            weights: vec![0.0; dim],
        }
    }
}

impl ValueFn for SigmoidLinearQ {
    fn num_actions(&self) -> usize {
        self.encoder.num_actions()
    }

    fn params(&self) -> &[f64] {
        &self.weights
    }

    fn action_values_with(&self, params: &[f64], obs: &Observation) -> Result<Vec<f64>> {
        (0..self.num_actions())
            .map(|a| self.evaluate_with(params, obs, a))
            .collect()
    }

    fn evaluate_with(&self, params: &[f64], obs: &Observation, action: usize) -> Result<f64> {
        check_len("sigmoid weights", self.weights.len(), params.len())?;
        Ok(sigmoid(self.encoder.encode(obs, action)?.dot_dense(params)))
    }
}

impl Differentiable for SigmoidLinearQ {
    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    fn accumulate_gradient(&self, obs: &Observation, action: usize, scale: f64, grad: &mut [f64]) -> Result<()> {
        check_len("gradient buffer", self.weights.len(), grad.len())?;
        let x = self.encoder.encode(obs, action)?;
        let s = sigmoid(x.dot_dense(&self.weights));
        let ds = s * (1.0 - s);
        for (i, v) in x.indices.iter().zip(&x.values) {
            grad[*i] += scale * ds * v;
        }
        Ok(())
    }
}
