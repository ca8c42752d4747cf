use crate::error::{Error, Result};
use crate::nn::{LossSpec, OptimizerKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossKind {
    MeanSquare,
    #[default]
    SmoothL1,
}

/// Step sizes and update cadence shared by the learners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentConfig {
    pub alpha: f64,
    /// Average-reward step-size multiplier (R̄ moves by η·α·δ); actor multiplier for A2C.
    pub eta: f64,
    pub gamma: f64,
    /// Smooth-L1 threshold.
    pub lambda: f64,
    pub batch_size: usize,
    pub tau_polyak: f64,
    pub update_period: usize,
    pub target_update_period: usize,
    pub optimizer: OptimizerKind,
    pub loss: LossKind,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            alpha: 2e-4,
            eta: 1.0,
            gamma: 0.99,
            lambda: 1.0,
            batch_size: 32,
            tau_polyak: 0.005,
            update_period: 1,
            target_update_period: 1,
            optimizer: OptimizerKind::Sgd,
            loss: LossKind::MeanSquare,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [("alpha", self.alpha), ("eta", self.eta), ("lambda", self.lambda)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config(format!("gamma must lie in [0, 1], got {}", self.gamma)));
        }
        if !(self.tau_polyak > 0.0 && self.tau_polyak <= 1.0) {
            return Err(Error::config(format!(
                "tau_polyak must lie in (0, 1], got {}",
                self.tau_polyak
            )));
        }
        if self.batch_size == 0 || self.update_period == 0 || self.target_update_period == 0 {
            return Err(Error::config("batch size and update periods must be positive"));
        }
        Ok(())
    }

    pub fn loss_spec(&self) -> LossSpec {
        match self.loss {
            LossKind::MeanSquare => LossSpec::MeanSquare,
            LossKind::SmoothL1 => LossSpec::SmoothL1 { lambda: self.lambda },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        AgentConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let bad = [
            AgentConfig { alpha: 0.0, ..Default::default() },
            AgentConfig { eta: -1.0, ..Default::default() },
            AgentConfig { gamma: 1.5, ..Default::default() },
            AgentConfig { tau_polyak: 0.0, ..Default::default() },
            AgentConfig { batch_size: 0, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().unwrap_err().is_config());
        }
    }
}
