use crate::error::{Error, Result};
use crate::tderr::TdReport;

/// Which TD error drives the average-reward estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArRule {
    Implicit,
    Explicit,
    /// The batch sample with the smallest explicit-error magnitude.
    SmallestMagnitude,
    None,
}

/// Running estimate `R̄` of the average reward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AvgRewardEstimator {
    pub r_bar: f64,
    pub eta: f64,
    pub rule: ArRule,
}

/// Index of the smallest `|x|`, ties to the lowest index.
pub fn smallest_magnitude_index(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate().skip(1) {
        if x.abs() < xs[best].abs() {
            best = i;
        }
    }
    best
}

impl AvgRewardEstimator {
    pub fn new(r_bar: f64, eta: f64, rule: ArRule) -> Result<Self> {
        if !r_bar.is_finite() {
            return Err(Error::NonFinite("initial average-reward estimate"));
        }
        if !(eta > 0.0) {
            return Err(Error::config(format!("eta must be positive, got {eta}")));
        }
        Ok(Self { r_bar, eta, rule })
    }

    /// The change this estimator's rule makes for one update.
    pub fn increment(&self, alpha: f64, report: &TdReport) -> f64 {
        let delta = match self.rule {
            ArRule::Implicit => report.implicit_mean,
            ArRule::Explicit => report.explicit_mean,
            ArRule::SmallestMagnitude => {
                report.explicit_per_sample[smallest_magnitude_index(&report.explicit_per_sample)]
            }
            ArRule::None => return 0.0,
        };
        self.eta * alpha * delta
    }

    /// Applies the rule's increment and returns it.
    pub fn apply(&mut self, alpha: f64, report: &TdReport) -> Result<f64> {
        let inc = self.increment(alpha, report);
        self.r_bar += inc;
        if !self.r_bar.is_finite() {
            return Err(Error::NonFinite("average-reward estimate"));
        }
        Ok(inc)
    }
}
