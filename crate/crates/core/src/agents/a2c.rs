use super::policy::{select_action, squashed_gaussian_grad, squashed_gaussian_log_prob, Action, ActionSource, SquashedSample};
use super::{AgentConfig, PolicySpec};
use crate::envs::Observation;
use crate::error::{check_len, Error, Result};
use crate::nn::MlpSpec;
use crate::rng::Rng;
use crate::tderr::Differentiable;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdvantageRule {
    Implicit,
    Explicit,
}

/// Online transition with the actor's pre-tanh sample, so `ln π` can be
/// recomputed exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousTransition {
    pub state: Observation,
    pub pre_tanh: f64,
    pub reward: f64,
    pub next_state: Observation,
    pub terminal: bool,
}

/// Network with two outputs: the Gaussian mean and the raw log-std.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianActor {
    pub spec: MlpSpec,
    pub params: Vec<f64>,
    pub log_std_min: f64,
    pub log_std_max: f64,
    pub max_action: f64,
}

impl GaussianActor {
    pub fn new(spec: MlpSpec, params: Vec<f64>, policy: &PolicySpec) -> Result<Self> {
        check_len("actor outputs", 2, spec.output_dim)?;
        check_len("actor parameters", spec.param_count(), params.len())?;
        policy.validate()?;
        let PolicySpec::SquashedGaussian {
            log_std_min,
            log_std_max,
            max_action,
        } = *policy
        else {
            return Err(Error::config("the actor needs a squashed Gaussian policy"));
        };
        Ok(Self {
            spec,
            params,
            log_std_min,
            log_std_max,
            max_action,
        })
    }

    pub fn policy(&self) -> PolicySpec {
        PolicySpec::SquashedGaussian {
            log_std_min: self.log_std_min,
            log_std_max: self.log_std_max,
            max_action: self.max_action,
        }
    }

    /// `(mean, raw log-std)` before clamping.
    pub fn heads_with(&self, params: &[f64], obs: &Observation) -> Result<(f64, f64)> {
        let out = self.spec.forward(params, obs.as_continuous()?)?;
        Ok((out[0], out[1]))
    }

    pub fn act(&self, obs: &Observation, rng: &mut Rng) -> Result<SquashedSample> {
        let (mean, raw_log_std) = self.heads_with(&self.params, obs)?;
        match select_action(&self.policy(), ActionSource::Gaussian { mean, raw_log_std }, rng)? {
            Action::Continuous(s) => Ok(s),
            Action::Discrete(_) => unreachable!("Gaussian source yields continuous actions"),
        }
    }

    pub fn log_prob_with(&self, params: &[f64], obs: &Observation, pre_tanh: f64) -> Result<f64> {
        let (mean, raw) = self.heads_with(params, obs)?;
        let log_std = raw.clamp(self.log_std_min, self.log_std_max);
        Ok(squashed_gaussian_log_prob(pre_tanh, mean, log_std, self.max_action))
    }

    /// Adds `scale · ∇_u ln π(a | s)` into `grad`.
    pub fn accumulate_log_prob_gradient(&self, obs: &Observation, pre_tanh: f64, scale: f64, grad: &mut [f64]) -> Result<()> {
        let x = obs.as_continuous()?;
        let (mean, raw) = self.heads_with(&self.params, obs)?;
        let (dm, ds) = squashed_gaussian_grad(pre_tanh, mean, raw, self.log_std_min, self.log_std_max);
        self.spec.backward(&self.params, x, &[dm, ds], scale, grad).map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct A2cReport {
    pub delta_e: f64,
    pub delta_i: f64,
    /// The advantage estimate the actor used.
    pub advantage: f64,
    pub log_prob: f64,
    /// `−ln π(A|S) · advantage`
    pub actor_loss: f64,
}

pub fn actor_loss(log_prob: f64, advantage: f64) -> f64 {
    -log_prob * advantage
}

/// Online advantage actor-critic with a state-value critic (one action slot).
#[derive(Debug, Clone)]
pub struct A2cLearner<C> {
    pub critic: C,
    pub actor: GaussianActor,
    pub config: AgentConfig,
    pub rule: AdvantageRule,
}

impl<C: Differentiable> A2cLearner<C> {
    pub fn new(critic: C, actor: GaussianActor, config: AgentConfig, rule: AdvantageRule) -> Result<Self> {
        config.validate()?;
        if critic.num_actions() != 1 {
            return Err(Error::config("the A2C critic must be a state-value function"));
        }
        Ok(Self {
            critic,
            actor,
            config,
            rule,
        })
    }

    pub fn value(&self, obs: &Observation) -> Result<f64> {
        self.critic.evaluate(obs, 0)
    }

    pub fn update(&mut self, t: &ContinuousTransition) -> Result<A2cReport> {
        let alpha = self.config.alpha;
        let v_s = self.value(&t.state)?;
        let bootstrap = if t.terminal {
            0.0
        } else {
            self.config.gamma * self.value(&t.next_state)?
        };
        let delta_e = t.reward + bootstrap - v_s;

        // critic: w′ = w + α δᵉ ∇V(S)
        let mut g = vec![0.0; self.critic.params().len()];
        self.critic.accumulate_gradient(&t.state, 0, delta_e, &mut g)?;
        for (w, gi) in self.critic.params_mut().iter_mut().zip(&g) {
            *w += alpha * gi;
        }
        if self.critic.params().iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("critic parameters"));
        }
        let delta_i = (self.value(&t.state)? - v_s) / alpha;
        let advantage = match self.rule {
            AdvantageRule::Implicit => delta_i,
            AdvantageRule::Explicit => delta_e,
        };

        // actor: u += η α δ ∇ ln π(A|S)
        let log_prob = self.actor.log_prob_with(&self.actor.params, &t.state, t.pre_tanh)?;
        let mut ga = vec![0.0; self.actor.params.len()];
        self.actor.accumulate_log_prob_gradient(&t.state, t.pre_tanh, advantage, &mut ga)?;
        let step = self.config.eta * alpha;
        for (u, gi) in self.actor.params.iter_mut().zip(&ga) {
            *u += step * gi;
        }
        if self.actor.params.iter().any(|u| !u.is_finite()) {
            return Err(Error::NonFinite("actor parameters"));
        }
        Ok(A2cReport {
            delta_e,
            delta_i,
            advantage,
            log_prob,
            actor_loss: actor_loss(log_prob, advantage),
        })
    }
}

pub fn a2c_update<C: Differentiable>(learner: &mut A2cLearner<C>, t: &ContinuousTransition) -> Result<A2cReport> {
    learner.update(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{FeatureEncoder, LinearQ};
    use crate::nn::glorot_init;
    use crate::rng;
    use rand::Rng as _;

    fn obs(theta: f64, speed: f64) -> Observation {
        Observation::Continuous(vec![theta.cos(), theta.sin(), speed])
    }

    fn actor(r: &mut Rng) -> GaussianActor {
        let spec = MlpSpec::new(3, &[6], 2).unwrap();
        let params = glorot_init(&spec, r).into_values();
        GaussianActor::new(spec, params, &PolicySpec::squashed_gaussian(2.0).unwrap()).unwrap()
    }

    fn critic(normalize: bool) -> LinearQ {
        LinearQ::new(FeatureEncoder::pendulum_tiles(8, 4, 1, normalize).unwrap(), 0.0)
    }

    fn config() -> AgentConfig {
        AgentConfig {
            alpha: 0.01,
            eta: 0.5,
            gamma: 0.9,
            ..Default::default()
        }
    }

    #[test]
    fn zero_error_moves_nothing() {
        let mut r = rng::from_seed(1);
        let mut l = A2cLearner::new(critic(true), actor(&mut r), config(), AdvantageRule::Explicit).unwrap();
        let before = (l.critic.weights.clone(), l.actor.params.clone());
        let rep = l
            .update(&ContinuousTransition {
                state: obs(0.1, 0.0),
                pre_tanh: 0.3,
                reward: 0.0,
                next_state: obs(0.2, 0.0),
                terminal: false,
            })
            .unwrap();
        assert_eq!(rep.delta_e, 0.0);
        assert_eq!((l.critic.weights, l.actor.params), before);
    }

    #[test]
    fn linear_implicit_advantage_is_scaled_explicit() {
        // unnormalized: ‖x(S)‖² = 8, so δⁱ = 8 δᵉ and the actor step is 8× larger
        let mut r = rng::from_seed(2);
        let a = actor(&mut r);
        let mut imp = A2cLearner::new(critic(false), a.clone(), config(), AdvantageRule::Implicit).unwrap();
        let mut exp = A2cLearner::new(critic(false), a.clone(), config(), AdvantageRule::Explicit).unwrap();
        let t = ContinuousTransition {
            state: obs(0.5, 1.0),
            pre_tanh: -0.2,
            reward: -1.3,
            next_state: obs(0.6, 1.2),
            terminal: false,
        };
        let ri = imp.update(&t).unwrap();
        let re = exp.update(&t).unwrap();
        assert!((ri.delta_i - 8.0 * ri.delta_e).abs() < 1e-10);
        for ((ui, ue), u0) in imp.actor.params.iter().zip(&exp.actor.params).zip(&a.params) {
            assert!(((ui - u0) - 8.0 * (ue - u0)).abs() < 1e-10);
        }
        assert_eq!(ri.delta_e, re.delta_e);
    }

    #[test]
    fn actor_loss_formula() {
        assert_eq!(actor_loss(-1.0, 2.0), 2.0);
    }

    #[test]
    fn terminal_drops_bootstrap() {
        let mut r = rng::from_seed(3);
        let mut c = critic(true);
        c.weights.iter_mut().for_each(|w| *w = 1.0);
        let mut l = A2cLearner::new(c, actor(&mut r), config(), AdvantageRule::Explicit).unwrap();
        let rep = l
            .update(&ContinuousTransition {
                state: obs(0.0, 0.0),
                pre_tanh: 0.0,
                reward: 0.5,
                next_state: obs(1.0, 0.0),
                terminal: true,
            })
            .unwrap();
        // V(S) = ‖x‖₁·w = 8 · (1/√8)
        assert!((rep.delta_e - (0.5 - 8f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn log_prob_gradient_matches_finite_differences() {
        let mut r = rng::from_seed(5);
        let a = actor(&mut r);
        let o = obs(r.random_range(-3.0..3.0), 0.7);
        let mut g = vec![0.0; a.params.len()];
        a.accumulate_log_prob_gradient(&o, 0.4, 1.0, &mut g).unwrap();
        let h = 1e-6;
        for i in 0..a.params.len() {
            let mut p = a.params.clone();
            p[i] += h;
            let up = a.log_prob_with(&p, &o, 0.4).unwrap();
            p[i] -= 2.0 * h;
            let down = a.log_prob_with(&p, &o, 0.4).unwrap();
            let fd = (up - down) / (2.0 * h);
            assert!((g[i] - fd).abs() < 1e-6 * (1.0 + fd.abs()), "param {i}: {} vs {fd}", g[i]);
        }
    }

    #[test]
    fn critic_must_be_state_valued() {
        let mut r = rng::from_seed(6);
        let q = LinearQ::new(FeatureEncoder::pendulum_tiles(8, 4, 3, true).unwrap(), 0.0);
        assert!(A2cLearner::new(q, actor(&mut r), config(), AdvantageRule::Implicit).is_err());
    }
}
