use super::ParamVector;
use crate::error::{check_len, Error, Result};

/// Adam moment estimates. Defaults are β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_num: f64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step_count: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps_num: 1e-8,
        }
    }

    fn apply(&mut self, params: &mut [f64], grad: &[f64], alpha: f64) -> Result<()> {
        check_len("Adam first moment", params.len(), self.m.len())?;
        check_len("Adam second moment", params.len(), self.v.len())?;
        self.step_count += 1;
        let t = self.step_count as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= alpha * m_hat / (v_hat.sqrt() + self.eps_num);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// Stateful optimizer owned by a learner.
#[derive(Debug, Clone, PartialEq)]
pub enum Optimizer {
    Sgd,
    Adam(AdamState),
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, len: usize) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd,
            OptimizerKind::Adam => Optimizer::Adam(AdamState::new(len)),
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        match self {
            Optimizer::Sgd => OptimizerKind::Sgd,
            Optimizer::Adam(_) => OptimizerKind::Adam,
        }
    }

    /// Descends along `grad`: `params ← params − α·update(grad)`.
    pub fn apply(&mut self, params: &mut [f64], grad: &[f64], alpha: f64) -> Result<()> {
        check_len("gradient", params.len(), grad.len())?;
        if !(alpha > 0.0) {
            return Err(Error::config(format!("step size must be positive, got {alpha}")));
        }
        match self {
            Optimizer::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= alpha * g;
                }
                Ok(())
            }
            Optimizer::Adam(state) => state.apply(params, grad, alpha),
        }
    }
}

/// Value-semantics optimizer step. `adam` must be present exactly when
/// `kind` is Adam; a fresh state is created by the caller with [`AdamState::new`].
pub fn optimizer_step(
    kind: OptimizerKind,
    params: &ParamVector,
    grad: &ParamVector,
    alpha: f64,
    adam: Option<AdamState>,
) -> Result<(ParamVector, Option<AdamState>)> {
    check_len("gradient", params.len(), grad.len())?;
    let mut opt = match (kind, adam) {
        (OptimizerKind::Sgd, None) => Optimizer::Sgd,
        (OptimizerKind::Adam, Some(state)) => Optimizer::Adam(state),
        (OptimizerKind::Sgd, Some(_)) => {
            return Err(Error::config("SGD step given an Adam state"))
        }
        (OptimizerKind::Adam, None) => return Err(Error::config("Adam step needs an Adam state")),
    };
    let mut values = params.values().to_vec();
    opt.apply(&mut values, grad.values(), alpha)?;
    let out = params.with_values(values)?;
    let state = match opt {
        Optimizer::Adam(s) => Some(s),
        Optimizer::Sgd => None,
    };
    Ok((out, state))
}

/// `target ← (1−τ)·target + τ·online`
pub fn polyak_in_place(target: &mut [f64], online: &[f64], tau: f64) -> Result<()> {
    check_len("Polyak online parameters", target.len(), online.len())?;
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::config(format!("Polyak tau must lie in (0, 1], got {tau}")));
    }
    if tau == 1.0 {
        target.copy_from_slice(online);
        return Ok(());
    }
    for (t, o) in target.iter_mut().zip(online) {
        *t = (1.0 - tau) * *t + tau * o;
    }
    Ok(())
}

pub fn polyak_update(target: &ParamVector, online: &ParamVector, tau: f64) -> Result<ParamVector> {
    let mut values = target.values().to_vec();
    polyak_in_place(&mut values, online.values(), tau)?;
    target.with_values(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::flat(v.to_vec()).unwrap()
    }

    #[test]
    fn sgd_single_step() {
        let (p, s) = optimizer_step(OptimizerKind::Sgd, &pv(&[0.0]), &pv(&[1.0]), 0.1, None).unwrap();
        assert_eq!(p.values(), &[-0.1]);
        assert!(s.is_none());
    }

    #[test]
    fn adam_first_step_is_bias_corrected() {
        let (p, s) = optimizer_step(
            OptimizerKind::Adam,
            &pv(&[0.0]),
            &pv(&[1.0]),
            0.1,
            Some(AdamState::new(1)),
        )
        .unwrap();
        assert!((p.values()[0] - (-0.1 / (1.0 + 1e-8))).abs() < 1e-15);
        assert_eq!(s.unwrap().step_count, 1);
    }

    #[test]
    fn adam_two_step_trace() {
        // hand-executed recurrence: m = 0.1, 0.19; v = 0.001, 0.001999;
        // both bias-corrected moments are 1 up to rounding
        let mut p = pv(&[0.0]);
        let mut s = Some(AdamState::new(1));
        for _ in 0..2 {
            let (np, ns) = optimizer_step(OptimizerKind::Adam, &p, &pv(&[1.0]), 0.1, s).unwrap();
            p = np;
            s = ns;
        }
        assert!((p.values()[0] - (-0.19999999799999935)).abs() < 1e-15);
        let s = s.unwrap();
        assert!((s.m[0] - 0.19).abs() < 1e-15);
        assert!((s.v[0] - 0.001999).abs() < 1e-15);
    }

    #[test]
    fn adam_presence_must_match_kind() {
        assert!(optimizer_step(OptimizerKind::Adam, &pv(&[0.0]), &pv(&[1.0]), 0.1, None).is_err());
        assert!(optimizer_step(
            OptimizerKind::Sgd,
            &pv(&[0.0]),
            &pv(&[1.0]),
            0.1,
            Some(AdamState::new(1))
        )
        .is_err());
        assert!(optimizer_step(OptimizerKind::Sgd, &pv(&[0.0]), &pv(&[1.0, 2.0]), 0.1, None).is_err());
    }

    #[test]
    fn polyak_cases() {
        let online = pv(&[1.0, -3.0]);
        let copied = polyak_update(&pv(&[7.0, 7.0]), &online, 1.0).unwrap();
        assert_eq!(copied.values(), online.values());
        let one = polyak_update(&pv(&[0.0]), &pv(&[1.0]), 0.005).unwrap();
        assert!((one.values()[0] - 0.005).abs() < 1e-18);
        assert!(polyak_update(&pv(&[0.0]), &pv(&[1.0]), 0.0).is_err());
        assert!(polyak_update(&pv(&[0.0]), &pv(&[1.0]), 1.5).is_err());
    }

    #[test]
    fn polyak_gap_shrinks_geometrically() {
        let tau = 0.005;
        let online = [2.0];
        let mut target = [0.0];
        for n in 1..=1000 {
            polyak_in_place(&mut target, &online, tau).unwrap();
            let gap = online[0] - target[0];
            let expected = 2.0 * (1.0 - tau).powi(n);
            assert!((gap - expected).abs() < 1e-12, "step {n}");
        }
    }

    proptest! {
        #[test]
        fn sgd_is_linear_in_gradient(
            p in prop::collection::vec(-10.0f64..10.0, 4),
            g1 in prop::collection::vec(-10.0f64..10.0, 4),
            g2 in prop::collection::vec(-10.0f64..10.0, 4),
            alpha in 1e-4f64..1.0,
        ) {
            let sum: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| a + b).collect();
            let step = |g: &[f64]| optimizer_step(OptimizerKind::Sgd, &pv(&p), &pv(g), alpha, None).unwrap().0;
            let lhs = step(&sum);
            let (a, b) = (step(&g1), step(&g2));
            for i in 0..4 {
                let rhs = a.values()[i] + b.values()[i] - p[i];
                prop_assert!((lhs.values()[i] - rhs).abs() < 1e-9);
            }
        }

        #[test]
        fn polyak_preserves_length_and_finiteness(
            t in prop::collection::vec(-1e6f64..1e6, 1..20),
            tau in 1e-6f64..=1.0,
        ) {
            let o: Vec<f64> = t.iter().map(|x| -x).collect();
            let out = polyak_update(&pv(&t), &pv(&o), tau).unwrap();
            prop_assert_eq!(out.len(), t.len());
            prop_assert!(out.is_finite());
        }
    }
}
