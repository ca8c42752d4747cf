//! Explicit and implicit TD errors.
//!
//! The explicit error is `target − Q(S, A)`. The implicit error is the change
//! in `Q(S, A)` across one update divided by the step size that update used.

use crate::envs::Observation;
use crate::error::{check_len, Error, Result};
use crate::features::FeatureVector;

/// Tolerance for the Gram-average equality condition.
pub const EQUALITY_TOLERANCE: f64 = 1e-9;

/// A full copy of a value function's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot(pub Vec<f64>);

impl Snapshot {
    pub fn params(&self) -> &[f64] {
        &self.0
    }
}

/// An action-value function `Q_w(s, a)` with flat parameters `w`.
///
/// State-value critics are the one-action special case.
pub trait ValueFn {
    fn num_actions(&self) -> usize;

    fn params(&self) -> &[f64];

    /// `Q(s, ·)` under an arbitrary parameter vector of the same layout.
    fn action_values_with(&self, params: &[f64], obs: &Observation) -> Result<Vec<f64>>;

    fn evaluate_with(&self, params: &[f64], obs: &Observation, action: usize) -> Result<f64> {
        let values = self.action_values_with(params, obs)?;
        values.get(action).copied().ok_or(Error::OutOfRange {
            what: "action id",
            index: action,
            size: values.len(),
        })
    }

    fn evaluate(&self, obs: &Observation, action: usize) -> Result<f64> {
        self.evaluate_with(self.params(), obs, action)
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot(self.params().to_vec())
    }

    fn evaluate_at(&self, snapshot: &Snapshot, obs: &Observation, action: usize) -> Result<f64> {
        check_len("snapshot", self.params().len(), snapshot.0.len())?;
        self.evaluate_with(&snapshot.0, obs, action)
    }

    fn action_values(&self, obs: &Observation) -> Result<Vec<f64>> {
        self.action_values_with(self.params(), obs)
    }

    fn max_value_with(&self, params: &[f64], obs: &Observation) -> Result<f64> {
        let values = self.action_values_with(params, obs)?;
        Ok(values.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }
}

/// A value function trainable by gradient steps.
pub trait Differentiable: ValueFn {
    fn params_mut(&mut self) -> &mut [f64];

    /// Adds `scale · ∂Q(obs, action)/∂w` into `grad`.
    fn accumulate_gradient(&self, obs: &Observation, action: usize, scale: f64, grad: &mut [f64]) -> Result<()>;
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Observation,
    pub action: usize,
    pub reward: f64,
    pub next_state: Observation,
    pub terminal: bool,
}

pub type Batch = Vec<Transition>;

/// How the bootstrapped target is formed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TdTarget {
    /// `R + γ max Q_T(S′)`
    Discounted { gamma: f64 },
    /// `R − R̄ + max Q_T(S′)`, continuing tasks only
    Differential { r_bar: f64 },
    /// `R − R̄ + γ max Q_T(S′)`
    Centered { gamma: f64, r_bar: f64 },
}

impl TdTarget {
    fn parts(&self) -> Result<(f64, f64)> {
        let (gamma, r_bar) = match *self {
            TdTarget::Discounted { gamma } => (gamma, 0.0),
            TdTarget::Differential { r_bar } => (1.0, r_bar),
            TdTarget::Centered { gamma, r_bar } => (gamma, r_bar),
        };
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::config(format!("gamma must lie in [0, 1], got {gamma}")));
        }
        if !r_bar.is_finite() {
            return Err(Error::NonFinite("average-reward estimate"));
        }
        Ok((gamma, r_bar))
    }
}

/// One explicit TD error.
pub fn explicit_td_one<V: ValueFn + ?Sized>(
    t: &Transition,
    value: &V,
    target: &Snapshot,
    mode: TdTarget,
) -> Result<f64> {
    let (gamma, r_bar) = mode.parts()?;
    if t.terminal && matches!(mode, TdTarget::Differential { .. }) {
        return Err(Error::config(
            "terminal transition in a differential (continuing) task",
        ));
    }
    let bootstrap = if t.terminal {
        0.0
    } else {
        check_len("target snapshot", value.params().len(), target.0.len())?;
        gamma * value.max_value_with(&target.0, &t.next_state)?
    };
    Ok(t.reward - r_bar + bootstrap - value.evaluate(&t.state, t.action)?)
}

/// Per-sample explicit TD errors against a target parameter snapshot.
pub fn explicit_td<V: ValueFn + ?Sized>(
    batch: &[Transition],
    value: &V,
    target: &Snapshot,
    mode: TdTarget,
) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::contract("empty batch"));
    }
    batch.iter().map(|t| explicit_td_one(t, value, target, mode)).collect()
}

/// Per-sample implicit TD errors `(Q_after − Q_before) / α`.
pub fn implicit_td<V: ValueFn + ?Sized>(
    batch: &[Transition],
    before: &Snapshot,
    after: &Snapshot,
    value: &V,
    alpha: f64,
) -> Result<Vec<f64>> {
    if !(alpha > 0.0) {
        return Err(Error::config(format!("implicit TD error needs α > 0, got {alpha}")));
    }
    batch
        .iter()
        .map(|t| {
            let q1 = value.evaluate_at(after, &t.state, t.action)?;
            let q0 = value.evaluate_at(before, &t.state, t.action)?;
            Ok((q1 - q0) / alpha)
        })
        .collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Both TD errors of one update and their gap on batch means.
#[derive(Debug, Clone, PartialEq)]
pub struct TdReport {
    pub explicit_per_sample: Vec<f64>,
    pub implicit_per_sample: Vec<f64>,
    pub explicit_mean: f64,
    pub implicit_mean: f64,
    /// `explicit_mean − implicit_mean`
    pub epsilon: f64,
    pub alpha_used: f64,
    /// Set when α was zero and the implicit error was copied from the explicit one.
    pub alpha_was_zero: bool,
}

impl TdReport {
    pub fn new(explicit: Vec<f64>, implicit: Vec<f64>, alpha: f64) -> Result<Self> {
        if explicit.is_empty() {
            return Err(Error::contract("empty TD report"));
        }
        check_len("implicit TD errors", explicit.len(), implicit.len())?;
        let explicit_mean = mean(&explicit);
        let implicit_mean = mean(&implicit);
        Ok(Self {
            explicit_per_sample: explicit,
            implicit_per_sample: implicit,
            explicit_mean,
            implicit_mean,
            epsilon: explicit_mean - implicit_mean,
            alpha_used: alpha,
            alpha_was_zero: false,
        })
    }

    pub fn abs_gap(&self) -> f64 {
        (self.explicit_mean - self.implicit_mean).abs()
    }
}

fn gram_means(features: &[FeatureVector]) -> Vec<f64> {
    let b = features.len() as f64;
    features
        .iter()
        .map(|xk| features.iter().map(|xj| xk.dot(xj)).sum::<f64>() / b)
        .collect()
}

/// Batch-mean implicit TD error that one linear SGD step on the mean
/// half-squared loss must produce:
/// `(1/B) Σ_k δᵉ_k · (1/B) Σ_j ⟨x_k, x_j⟩`.
pub fn predict_implicit_linear(features: &[FeatureVector], explicit: &[f64]) -> Result<f64> {
    check_len("explicit TD errors", features.len(), explicit.len())?;
    if features.is_empty() {
        return Err(Error::contract("empty batch"));
    }
    let g = gram_means(features);
    Ok(explicit.iter().zip(&g).map(|(d, g)| d * g).sum::<f64>() / features.len() as f64)
}

/// Whether each sample's mean inner product with the batch equals one.
pub fn batch_equality_condition(features: &[FeatureVector]) -> Result<(bool, Vec<f64>)> {
    if features.is_empty() {
        return Err(Error::contract("empty batch"));
    }
    let g = gram_means(features);
    let ok = g.iter().all(|m| (m - 1.0).abs() <= EQUALITY_TOLERANCE);
    Ok((ok, g))
}

/// Running decomposition of an average-reward estimate into the part driven
/// by implicit TD errors and the part driven by the gap `ε`.
///
/// For the explicit rule, `R̄_n = R̄_0 + implicit_sum + epsilon_sum`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonLedger {
    pub r_bar0: f64,
    pub implicit_sum: f64,
    pub epsilon_sum: f64,
    pub updates: u64,
}

impl EpsilonLedger {
    pub fn new(r_bar0: f64) -> Self {
        Self {
            r_bar0,
            implicit_sum: 0.0,
            epsilon_sum: 0.0,
            updates: 0,
        }
    }

    pub fn reconstruct(&self) -> f64 {
        self.r_bar0 + self.implicit_sum + self.epsilon_sum
    }

    /// The trajectory an implicit-rule learner would have followed.
    pub fn implicit_only(&self) -> f64 {
        self.r_bar0 + self.implicit_sum
    }
}

pub fn epsilon_ledger_update(
    ledger: EpsilonLedger,
    alpha: f64,
    eta: f64,
    epsilon: f64,
    delta_i: f64,
) -> EpsilonLedger {
    EpsilonLedger {
        implicit_sum: ledger.implicit_sum + eta * alpha * delta_i,
        epsilon_sum: ledger.epsilon_sum + eta * alpha * epsilon,
        updates: ledger.updates + 1,
        ..ledger
    }
}
