use crate::error::{Error, Result};

/// Smooth L1 (Huber-style) loss: `x²/(2λ)` inside `|x| ≤ λ`, `|x| − λ/2` outside.
pub fn smooth_l1(x: f64, lambda: f64) -> f64 {
    let ax = x.abs();
    if ax <= lambda {
        x * x / (2.0 * lambda)
    } else {
        ax - 0.5 * lambda
    }
}

/// `x/λ` inside the quadratic zone, `sign(x)` outside.
pub fn smooth_l1_derivative(x: f64, lambda: f64) -> f64 {
    if x.abs() <= lambda {
        x / lambda
    } else {
        x.signum()
    }
}

/// Per-sample critic loss applied to an explicit TD error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossSpec {
    /// `½δ²`
    MeanSquare,
    SmoothL1 { lambda: f64 },
}

impl LossSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LossSpec::SmoothL1 { lambda } if !(lambda > 0.0 && lambda.is_finite()) => Err(
                Error::config(format!("smooth L1 lambda must be positive, got {lambda}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match *self {
            LossSpec::MeanSquare => 0.5 * x * x,
            LossSpec::SmoothL1 { lambda } => smooth_l1(x, lambda),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            LossSpec::MeanSquare => x,
            LossSpec::SmoothL1 { lambda } => smooth_l1_derivative(x, lambda),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_at_origin() {
        assert_eq!(smooth_l1(0.0, 1.0), 0.0);
        assert_eq!(smooth_l1_derivative(0.0, 1.0), 0.0);
    }

    #[test]
    fn unit_lambda_values() {
        assert_eq!(smooth_l1(0.5, 1.0), 0.125);
        assert_eq!(smooth_l1(2.0, 1.0), 1.5);
        assert_eq!(smooth_l1_derivative(0.5, 1.0), 0.5);
        assert_eq!(smooth_l1_derivative(-2.0, 1.0), -1.0);
    }

    #[test]
    fn continuous_at_the_knee() {
        for lambda in [0.5, 1.0, 2.0] {
            let lo = smooth_l1(lambda - 1e-9, lambda);
            let hi = smooth_l1(lambda + 1e-9, lambda);
            assert!((hi - lo).abs() < 1e-8, "lambda {lambda}: {lo} vs {hi}");
            let dlo = smooth_l1_derivative(lambda - 1e-9, lambda);
            let dhi = smooth_l1_derivative(lambda + 1e-9, lambda);
            assert!((dhi - dlo).abs() < 1e-8);
        }
    }

    #[test]
    fn lambda_must_be_positive() {
        assert!(LossSpec::SmoothL1 { lambda: 0.0 }.validate().is_err());
        assert!(LossSpec::SmoothL1 { lambda: 1.0 }.validate().is_ok());
    }

    proptest! {
        #[test]
        fn even_nonnegative_bounded_slope(x in -50.0f64..50.0, lambda in 0.01f64..10.0) {
            let l = smooth_l1(x, lambda);
            prop_assert_eq!(l, smooth_l1(-x, lambda));
            prop_assert!(l >= 0.0);
            if x != 0.0 {
                prop_assert!(l > 0.0);
            }
            prop_assert!(smooth_l1_derivative(x, lambda).abs() <= 1.0);
        }
    }
}
