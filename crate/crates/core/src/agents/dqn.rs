use super::{AgentConfig, ArRule, AvgRewardEstimator};
use crate::error::{Error, Result};
use crate::nn::{polyak_in_place, LossSpec, Optimizer};
use crate::replay::ReplayBuffer;
use crate::rng::Rng;
use crate::tderr::{
    epsilon_ledger_update, explicit_td, implicit_td, Differentiable, EpsilonLedger, Snapshot, TdReport, TdTarget,
    Transition,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DqnMode {
    /// Plain discounted DQN.
    Discounted,
    /// Average-reward (undiscounted) targets `R − R̄ + max Q_T(S′)`.
    Differential,
    /// Discounted targets on centred rewards `R − R̄`.
    Centered,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DqnStep {
    pub report: TdReport,
    pub r_bar_increment: f64,
    pub loss: f64,
}

/// Online network, Polyak target, optimizer and average-reward state.
#[derive(Debug, Clone)]
pub struct DqnLearner<V> {
    pub value: V,
    pub target: Snapshot,
    pub optimizer: Optimizer,
    pub config: AgentConfig,
    pub loss: LossSpec,
    pub mode: DqnMode,
    pub estimator: AvgRewardEstimator,
    pub ledger: EpsilonLedger,
    pub updates: u64,
}

impl<V: Differentiable> DqnLearner<V> {
    pub fn new(value: V, config: AgentConfig, mode: DqnMode, estimator: AvgRewardEstimator) -> Result<Self> {
        config.validate()?;
        let loss = config.loss_spec();
        loss.validate()?;
        match mode {
            DqnMode::Differential if config.gamma != 1.0 => {
                return Err(Error::config(format!(
                    "differential targets are undiscounted; set gamma = 1 (got {})",
                    config.gamma
                )))
            }
            DqnMode::Discounted if estimator.rule != ArRule::None => {
                return Err(Error::config("discounted DQN keeps no average-reward estimate; use rule none"))
            }
            _ => {}
        }
        let target = value.snapshot();
        let optimizer = Optimizer::new(config.optimizer, value.params().len());
        let ledger = EpsilonLedger::new(estimator.r_bar);
        Ok(Self {
            value,
            target,
            optimizer,
            config,
            loss,
            mode,
            estimator,
            ledger,
            updates: 0,
        })
    }

    pub fn td_target(&self) -> TdTarget {
        match self.mode {
            DqnMode::Discounted => TdTarget::Discounted {
                gamma: self.config.gamma,
            },
            DqnMode::Differential => TdTarget::Differential {
                r_bar: self.estimator.r_bar,
            },
            DqnMode::Centered => TdTarget::Centered {
                gamma: self.config.gamma,
                r_bar: self.estimator.r_bar,
            },
        }
    }

    /// One update on a given batch: explicit errors against the target,
    /// a loss step, implicit errors from the online parameters before and
    /// after, the average-reward step, then the target blend.
    pub fn update(&mut self, batch: &[Transition]) -> Result<DqnStep> {
        let alpha = self.config.alpha;
        let explicit = explicit_td(batch, &self.value, &self.target, self.td_target())?;

        let b = batch.len() as f64;
        let mut grad = vec![0.0; self.value.params().len()];
        let mut loss = 0.0;
        for (t, d) in batch.iter().zip(&explicit) {
            loss += self.loss.value(*d) / b;
            // δ = y − Q, so ∂L(δ)/∂w = −L′(δ)·∇Q
            let scale = -self.loss.derivative(*d) / b;
            if scale != 0.0 {
                self.value.accumulate_gradient(&t.state, t.action, scale, &mut grad)?;
            }
        }

        let before = self.value.snapshot();
        self.optimizer.apply(self.value.params_mut(), &grad, alpha)?;
        if self.value.params().iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("value-function parameters"));
        }
        let after = self.value.snapshot();
        let implicit = implicit_td(batch, &before, &after, &self.value, alpha)?;
        let report = TdReport::new(explicit, implicit, alpha)?;

        let r_bar_increment = self.estimator.apply(alpha, &report)?;
        if self.estimator.rule != ArRule::None {
            self.ledger = epsilon_ledger_update(
                self.ledger,
                alpha,
                self.estimator.eta,
                report.epsilon,
                report.implicit_mean,
            );
        }

        self.updates += 1;
        if self.updates % self.config.target_update_period as u64 == 0 {
            polyak_in_place(&mut self.target.0, self.value.params(), self.config.tau_polyak)?;
        }
        Ok(DqnStep {
            report,
            r_bar_increment,
            loss,
        })
    }
}

/// Samples a batch from `buffer` and applies one learner update.
pub fn dqn_update<V: Differentiable>(
    learner: &mut DqnLearner<V>,
    buffer: &ReplayBuffer<Transition>,
    rng: &mut Rng,
) -> Result<DqnStep> {
    let batch = buffer.sample(learner.config.batch_size, rng)?;
    learner.update(&batch)
}
