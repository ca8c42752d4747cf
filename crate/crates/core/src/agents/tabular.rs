use super::{AvgRewardEstimator, TabularQ};
use crate::error::{Error, Result};
use crate::tderr::{Transition, ValueFn};

/// Both TD errors of one tabular update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TabularStep {
    pub delta_e: f64,
    pub delta_i: f64,
    /// α was zero, so `delta_i` was set equal to `delta_e` instead of divided by zero.
    pub alpha_was_zero: bool,
}

fn apply(q: &mut TabularQ, t: &Transition, alpha: f64, delta_e: f64) -> Result<TabularStep> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::config(format!("step size must be non-negative, got {alpha}")));
    }
    let slot = q.slot(&t.state, t.action)?;
    let before = q.table[slot];
    if alpha == 0.0 {
        return Ok(TabularStep {
            delta_e,
            delta_i: delta_e,
            alpha_was_zero: true,
        });
    }
    q.table[slot] = before + alpha * delta_e;
    if !q.table[slot].is_finite() {
        return Err(Error::NonFinite("action-value table"));
    }
    Ok(TabularStep {
        delta_e,
        delta_i: (q.table[slot] - before) / alpha,
        alpha_was_zero: false,
    })
}

/// One-step Q-learning on the visited entry.
pub fn tabular_q_update(q: &mut TabularQ, t: &Transition, alpha: f64, gamma: f64) -> Result<TabularStep> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::config(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    let bootstrap = if t.terminal {
        0.0
    } else {
        gamma * q.max_value_with(&q.table, &t.next_state)?
    };
    let delta = t.reward + bootstrap - q.evaluate(&t.state, t.action)?;
    apply(q, t, alpha, delta)
}

/// Differential Q-learning: undiscounted, rewards centred by `R̄`, and
/// `R̄ += η·α·δ` unless the estimator's rule is `None`.
pub fn tabular_differential_q_update(
    q: &mut TabularQ,
    est: &mut AvgRewardEstimator,
    t: &Transition,
    alpha: f64,
) -> Result<TabularStep> {
    if t.terminal {
        return Err(Error::contract(
            "differential Q-learning is for continuing tasks; got a terminal transition",
        ));
    }
    let delta = t.reward - est.r_bar + q.max_value_with(&q.table, &t.next_state)?
        - q.evaluate(&t.state, t.action)?;
    let step = apply(q, t, alpha, delta)?;
    if est.rule != super::ArRule::None {
        est.r_bar += est.eta * alpha * delta;
    }
    Ok(step)
}
