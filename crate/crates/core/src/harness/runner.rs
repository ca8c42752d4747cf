use super::config::{Algorithm, EnvKind, EnvSpec, ExperimentKind, RunConfig, ValueFnKind};
use crate::agents::{
    epsilon_greedy, tabular_differential_q_update, tabular_q_update, A2cLearner, ArRule, AvgRewardEstimator,
    ContinuousTransition, DqnLearner, DqnMode, FeatureEncoder, GaussianActor, InputMap, LinearQ, MlpQ, PolicySpec,
    SigmoidLinearQ, StateIndexer, TabularQ,
};
use crate::envs::{
    generate_random_mdp, ring_mdp, swap_chain, EnvAction, Environment, MdpEnv, Observation, PendulumEnv,
    PendulumParams,
};
use crate::error::Result;
use crate::nn::{glorot_init, MlpSpec};
use crate::replay::ReplayBuffer;
use crate::rng::{self, Rng, Stream};
use crate::tderr::{argmax, Differentiable, EpsilonLedger, Transition, ValueFn};

/// One environment step's metrics. Fields with no value at this step are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: u64,
    pub delta_e_mean: Option<f64>,
    pub delta_i_mean: Option<f64>,
    pub abs_gap: Option<f64>,
    pub r_bar: Option<f64>,
    pub episode_return: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SignAgreement {
    pub agree: u64,
    pub total: u64,
}

impl SignAgreement {
    pub fn rate(&self) -> f64 {
        if self.total == 0 {
            1.0
        } else {
            self.agree as f64 / self.total as f64
        }
    }
}

/// Everything recorded for one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub seed: u64,
    pub records: Vec<StepRecord>,
    /// Final ε-ledger of average-reward learners.
    pub ledger: Option<EpsilonLedger>,
    /// Largest `|ledger reconstruction − tracked R̄|` seen over the run.
    pub max_ledger_discrepancy: Option<f64>,
    /// Sign agreement of the two TD errors at steps where an update ran (A2C).
    pub sign_agreement: Option<SignAgreement>,
    /// Greedy action per state at the end of the run (finite MDPs).
    pub greedy_actions: Option<Vec<usize>>,
}

impl RunMetrics {
    pub fn gaps(&self) -> Vec<Option<f64>> {
        self.records.iter().map(|r| r.abs_gap).collect()
    }

    pub fn r_bars(&self) -> Vec<Option<f64>> {
        self.records.iter().map(|r| r.r_bar).collect()
    }
}

/// All seeds for one configuration (one initial estimate, for sweeps).
#[derive(Debug, Clone, PartialEq)]
pub struct RunGroup {
    pub label: String,
    pub r_bar0: Option<f64>,
    pub runs: Vec<RunMetrics>,
}

struct Experience {
    state: Observation,
    action: usize,
    pre_tanh: f64,
    reward: f64,
    next_state: Observation,
    terminal: bool,
}

struct UpdateOutcome {
    delta_e_mean: f64,
    delta_i_mean: f64,
    ledger: Option<EpsilonLedger>,
}

trait Agent {
    /// Environment action plus the pre-tanh sample for continuous actions.
    fn act(&mut self, obs: &Observation, rng: &mut Rng) -> Result<(EnvAction, usize, f64)>;
    fn learn(&mut self, exp: Experience, rng: &mut Rng) -> Result<Option<UpdateOutcome>>;
    fn r_bar(&self) -> Option<f64>;
    fn rule(&self) -> ArRule;
    fn greedy(&self, obs: &Observation) -> Result<usize>;
}

struct TabularAgent {
    q: TabularQ,
    est: Option<AvgRewardEstimator>,
    alpha: f64,
    gamma: f64,
    epsilon: f64,
}

impl Agent for TabularAgent {
    fn act(&mut self, obs: &Observation, rng: &mut Rng) -> Result<(EnvAction, usize, f64)> {
        let a = epsilon_greedy(&self.q.action_values(obs)?, self.epsilon, rng);
        Ok((EnvAction::Discrete(a), a, 0.0))
    }

    fn learn(&mut self, exp: Experience, _rng: &mut Rng) -> Result<Option<UpdateOutcome>> {
        let t = Transition {
            state: exp.state,
            action: exp.action,
            reward: exp.reward,
            next_state: exp.next_state,
            terminal: exp.terminal,
        };
        let step = match self.est.as_mut() {
            Some(est) => tabular_differential_q_update(&mut self.q, est, &t, self.alpha)?,
            None => tabular_q_update(&mut self.q, &t, self.alpha, self.gamma)?,
        };
        Ok(Some(UpdateOutcome {
            delta_e_mean: step.delta_e,
            delta_i_mean: step.delta_i,
            ledger: None,
        }))
    }

    fn r_bar(&self) -> Option<f64> {
        self.est.map(|e| e.r_bar)
    }

    fn rule(&self) -> ArRule {
        self.est.map_or(ArRule::None, |e| e.rule)
    }

    fn greedy(&self, obs: &Observation) -> Result<usize> {
        Ok(argmax(&self.q.action_values(obs)?))
    }
}

struct DqnAgent<V> {
    learner: DqnLearner<V>,
    buffer: Option<ReplayBuffer<Transition>>,
    epsilon: f64,
    steps: u64,
}

impl<V: Differentiable> Agent for DqnAgent<V> {
    fn act(&mut self, obs: &Observation, rng: &mut Rng) -> Result<(EnvAction, usize, f64)> {
        let a = epsilon_greedy(&self.learner.value.action_values(obs)?, self.epsilon, rng);
        Ok((EnvAction::Discrete(a), a, 0.0))
    }

    fn learn(&mut self, exp: Experience, rng: &mut Rng) -> Result<Option<UpdateOutcome>> {
        let t = Transition {
            state: exp.state,
            action: exp.action,
            reward: exp.reward,
            next_state: exp.next_state,
            terminal: exp.terminal,
        };
        self.steps += 1;
        let due = self.steps % self.learner.config.update_period as u64 == 0;
        let step = match self.buffer.as_mut() {
            Some(buffer) => {
                buffer.push(t);
                if !due || !buffer.is_ready(self.learner.config.batch_size) {
                    return Ok(None);
                }
                crate::agents::dqn_update(&mut self.learner, buffer, rng)?
            }
            None => {
                if !due {
                    return Ok(None);
                }
                self.learner.update(std::slice::from_ref(&t))?
            }
        };
        Ok(Some(UpdateOutcome {
            delta_e_mean: step.report.explicit_mean,
            delta_i_mean: step.report.implicit_mean,
            ledger: (self.learner.estimator.rule != ArRule::None).then_some(self.learner.ledger),
        }))
    }

    fn r_bar(&self) -> Option<f64> {
        (self.learner.mode != DqnMode::Discounted).then_some(self.learner.estimator.r_bar)
    }

    fn rule(&self) -> ArRule {
        self.learner.estimator.rule
    }

    fn greedy(&self, obs: &Observation) -> Result<usize> {
        Ok(argmax(&self.learner.value.action_values(obs)?))
    }
}

struct A2cAgent<C> {
    learner: A2cLearner<C>,
}

impl<C: Differentiable> Agent for A2cAgent<C> {
    fn act(&mut self, obs: &Observation, rng: &mut Rng) -> Result<(EnvAction, usize, f64)> {
        let s = self.learner.actor.act(obs, rng)?;
        Ok((EnvAction::Continuous(s.action), 0, s.pre_tanh))
    }

    fn learn(&mut self, exp: Experience, _rng: &mut Rng) -> Result<Option<UpdateOutcome>> {
        let rep = self.learner.update(&ContinuousTransition {
            state: exp.state,
            pre_tanh: exp.pre_tanh,
            reward: exp.reward,
            next_state: exp.next_state,
            terminal: exp.terminal,
        })?;
        Ok(Some(UpdateOutcome {
            delta_e_mean: rep.delta_e,
            delta_i_mean: rep.delta_i,
            ledger: None,
        }))
    }

    fn r_bar(&self) -> Option<f64> {
        None
    }

    fn rule(&self) -> ArRule {
        ArRule::None
    }

    fn greedy(&self, _obs: &Observation) -> Result<usize> {
        Ok(0)
    }
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

pub fn build_environment(spec: &EnvSpec) -> Result<Environment> {
    Ok(match spec.kind {
        EnvKind::Pendulum => Environment::Pendulum(PendulumEnv::new(PendulumParams::default())),
        EnvKind::ContinuingPendulum => Environment::Pendulum(PendulumEnv::new(PendulumParams::continuing())),
        EnvKind::RandomMdp => Environment::Mdp(MdpEnv::new(generate_random_mdp(
            spec.mdp_seed,
            spec.num_states,
            spec.num_actions,
            spec.ergodic,
        )?)),
        EnvKind::Ring => Environment::Mdp(MdpEnv::new(ring_mdp(spec.ring_size, spec.advance_prob)?)),
        EnvKind::Swap => Environment::Mdp(MdpEnv::new(swap_chain())),
    })
}

fn dqn_agent<V: Differentiable + 'static>(value: V, cfg: &RunConfig, r_bar0: f64) -> Result<Box<dyn Agent>> {
    let a = &cfg.agent;
    let mode = match a.algorithm {
        Algorithm::QLearning => DqnMode::Discounted,
        Algorithm::DifferentialQ => DqnMode::Differential,
        Algorithm::CenteredQ => DqnMode::Centered,
        Algorithm::A2c => unreachable!("A2C is built separately"),
    };
    let est = AvgRewardEstimator::new(r_bar0, a.config.eta, a.ar_rule)?;
    let learner = DqnLearner::new(value, a.config, mode, est)?;
    let buffer = if a.replay {
        Some(ReplayBuffer::new(a.replay_capacity, a.replay_min)?)
    } else {
        None
    };
    Ok(Box::new(DqnAgent {
        learner,
        buffer,
        epsilon: a.epsilon,
        steps: 0,
    }))
}

fn build_agent(cfg: &RunConfig, env: &Environment, r_bar0: f64, init: &mut Rng) -> Result<Box<dyn Agent>> {
    let a = &cfg.agent;
    let (finite_states, obs_dim) = match env {
        Environment::Mdp(m) => (Some(m.spec.num_states), m.spec.num_states),
        Environment::Pendulum(_) => (None, 3),
    };
    let input = match finite_states {
        Some(n) => InputMap::OneHot(n),
        None => InputMap::Raw,
    };
    let encoder = |num_actions: usize| -> Result<FeatureEncoder> {
        match finite_states {
            Some(num_states) => Ok(FeatureEncoder::OneHot {
                num_states,
                num_actions,
            }),
            None => FeatureEncoder::pendulum_tiles(a.tilings, a.tiles_per_dim, num_actions, a.normalize),
        }
    };
    let mlp = |out: usize, init: &mut Rng| -> Result<MlpQ> {
        let spec = MlpSpec::new(obs_dim, &a.hidden, out)?;
        let params = glorot_init(&spec, init).into_values();
        MlpQ::new(spec, params, input)
    };

    if a.algorithm == Algorithm::A2c {
        let actor_spec = MlpSpec::new(obs_dim, &a.actor_hidden, 2)?;
        let actor_params = glorot_init(&actor_spec, init).into_values();
        let actor = GaussianActor::new(actor_spec, actor_params, &PolicySpec::squashed_gaussian(2.0)?)?;
        return Ok(match a.value_fn {
            ValueFnKind::Linear => Box::new(A2cAgent {
                learner: A2cLearner::new(LinearQ::new(encoder(1)?, 0.0), actor, a.config, a.advantage)?,
            }),
            ValueFnKind::Mlp => Box::new(A2cAgent {
                learner: A2cLearner::new(mlp(1, init)?, actor, a.config, a.advantage)?,
            }),
            _ => unreachable!("validated"),
        });
    }

    let num_actions = env.num_discrete_actions();
    match a.value_fn {
        ValueFnKind::Tabular => {
            let indexer = match finite_states {
                Some(num_states) => StateIndexer::Identity { num_states },
                None => StateIndexer::PendulumGrid {
                    theta_bins: a.grid_theta,
                    speed_bins: a.grid_speed,
                    max_speed: PendulumParams::default().max_speed,
                },
            };
            let q = TabularQ::new(indexer, num_actions, 0.0)?;
            let dedicated = !a.replay && matches!(a.algorithm, Algorithm::QLearning | Algorithm::DifferentialQ);
            if dedicated {
                let est = match a.algorithm {
                    Algorithm::DifferentialQ => Some(AvgRewardEstimator::new(r_bar0, a.config.eta, a.ar_rule)?),
                    _ => None,
                };
                Ok(Box::new(TabularAgent {
                    q,
                    est,
                    alpha: a.config.alpha,
                    gamma: a.config.gamma,
                    epsilon: a.epsilon,
                }))
            } else {
                dqn_agent(q, cfg, r_bar0)
            }
        }
        ValueFnKind::Linear => dqn_agent(LinearQ::new(encoder(num_actions)?, 0.0), cfg, r_bar0),
        ValueFnKind::Sigmoid => dqn_agent(SigmoidLinearQ::new(encoder(num_actions)?), cfg, r_bar0),
        ValueFnKind::Mlp => dqn_agent(mlp(num_actions, init)?, cfg, r_bar0),
    }
}

/// Runs one seed. Each seed owns four PRNG streams derived from it:
/// environment, action selection, replay sampling and initialisation.
pub fn run_seed(cfg: &RunConfig, seed: u64, r_bar0: f64) -> Result<RunMetrics> {
    cfg.validate()?;
    let mut env_rng = rng::stream(seed, Stream::Environment);
    let mut agent_rng = rng::stream(seed, Stream::Agent);
    let mut replay_rng = rng::stream(seed, Stream::Replay);
    let mut init_rng = rng::stream(seed, Stream::Init);

    let mut env = build_environment(&cfg.env)?;
    let mut agent = build_agent(cfg, &env, r_bar0, &mut init_rng)?;
    let mut obs = env.reset(&mut env_rng);
    let mut episode_return = 0.0;
    let mut records = Vec::with_capacity(cfg.total_steps as usize);
    let mut ledger = None;
    let mut max_disc: Option<f64> = None;
    let mut signs: Option<SignAgreement> = (cfg.agent.algorithm == Algorithm::A2c).then(SignAgreement::default);

    for step in 1..=cfg.total_steps {
        let (env_action, action, pre_tanh) = agent.act(&obs, &mut agent_rng)?;
        let out = env.step(env_action, &mut env_rng)?;
        episode_return += out.reward;
        let done = out.terminal || out.truncated;
        let outcome = agent.learn(
            Experience {
                state: obs.clone(),
                action,
                pre_tanh,
                reward: out.reward,
                next_state: out.next_observation.clone(),
                terminal: out.terminal,
            },
            &mut replay_rng,
        )?;
        let r_bar = agent.r_bar();
        let mut rec = StepRecord {
            step,
            delta_e_mean: None,
            delta_i_mean: None,
            abs_gap: None,
            r_bar,
            episode_return: done.then_some(episode_return),
            seed,
        };
        if let Some(u) = outcome {
            rec.delta_e_mean = Some(u.delta_e_mean);
            rec.delta_i_mean = Some(u.delta_i_mean);
            rec.abs_gap = Some((u.delta_e_mean - u.delta_i_mean).abs());
            if let Some(s) = signs.as_mut() {
                s.total += 1;
                if sign(u.delta_e_mean) == sign(u.delta_i_mean) {
                    s.agree += 1;
                }
            }
            if let (Some(l), Some(r)) = (u.ledger, r_bar) {
                let reconstructed = match agent.rule() {
                    ArRule::Explicit => Some(l.reconstruct()),
                    ArRule::Implicit => Some(l.implicit_only()),
                    _ => None,
                };
                if let Some(x) = reconstructed {
                    let d = (x - r).abs();
                    max_disc = Some(max_disc.map_or(d, |m: f64| m.max(d)));
                }
                ledger = Some(l);
            }
        }
        records.push(rec);
        if done {
            obs = env.reset(&mut env_rng);
            episode_return = 0.0;
        } else {
            obs = out.next_observation;
        }
    }

    let greedy_actions = match &env {
        Environment::Mdp(m) if cfg.agent.algorithm != Algorithm::A2c => Some(
            (0..m.spec.num_states)
                .map(|s| agent.greedy(&Observation::Discrete(s)))
                .collect::<Result<Vec<_>>>()?,
        ),
        _ => None,
    };
    Ok(RunMetrics {
        seed,
        records,
        ledger,
        max_ledger_discrepancy: max_disc,
        sign_agreement: signs,
        greedy_actions,
    })
}

/// Runs every seed (and, for the average-reward experiment, every initial
/// estimate). Seeds run one after another; results do not depend on order.
pub fn run_experiment(cfg: &RunConfig) -> Result<Vec<RunGroup>> {
    cfg.validate()?;
    let sweep: Vec<Option<f64>> = if cfg.experiment == ExperimentKind::AvgRewardEstimate {
        cfg.r_bar0_sweep.iter().copied().map(Some).collect()
    } else {
        vec![None]
    };
    sweep
        .into_iter()
        .map(|r0| {
            let r_bar0 = r0.unwrap_or(cfg.agent.r_bar0);
            let runs = cfg
                .seeds
                .iter()
                .map(|&seed| run_seed(cfg, seed, r_bar0))
                .collect::<Result<Vec<_>>>()?;
            let label = match r0 {
                Some(r) => format!("{}_rbar0_{}", cfg.name, r),
                None => cfg.name.clone(),
            };
            Ok(RunGroup {
                label,
                r_bar0: r0,
                runs,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tabular_mdp(algorithm: Algorithm) -> RunConfig {
        let mut c = RunConfig::default();
        c.name = "t".into();
        c.agent.algorithm = algorithm;
        c.agent.value_fn = ValueFnKind::Tabular;
        c.agent.replay = false;
        c.agent.config.alpha = 0.1;
        c.env.kind = EnvKind::RandomMdp;
        c.seeds = vec![1, 2];
        c.total_steps = 500;
        if algorithm == Algorithm::DifferentialQ {
            c.agent.ar_rule = ArRule::Implicit;
        }
        c
    }

    #[test]
    fn tabular_gap_vanishes() {
        for alg in [Algorithm::QLearning, Algorithm::DifferentialQ] {
            let groups = run_experiment(&tabular_mdp(alg)).unwrap();
            for r in groups[0].runs.iter().flat_map(|r| &r.records) {
                assert!(r.abs_gap.unwrap() <= 1e-10);
            }
        }
    }

    #[test]
    fn abs_gap_matches_columns() {
        let mut c = tabular_mdp(Algorithm::QLearning);
        c.agent.value_fn = ValueFnKind::Mlp;
        c.agent.replay = true;
        c.agent.hidden = vec![8];
        c.agent.config.alpha = 1e-3;
        c.total_steps = 300;
        let groups = run_experiment(&c).unwrap();
        let recs = &groups[0].runs[0].records;
        assert!(recs[..c.agent.replay_min - 1].iter().all(|r| r.abs_gap.is_none()));
        for r in recs.iter().filter(|r| r.abs_gap.is_some()) {
            let d = (r.delta_e_mean.unwrap() - r.delta_i_mean.unwrap()).abs();
            assert!((r.abs_gap.unwrap() - d).abs() <= 1e-12);
        }
        assert_eq!(recs.iter().filter(|r| r.abs_gap.is_some()).count(), 300 - 99);
    }

    #[test]
    fn repeated_runs_are_identical() {
        let mut c = tabular_mdp(Algorithm::DifferentialQ);
        c.agent.value_fn = ValueFnKind::Linear;
        c.agent.replay = true;
        c.agent.config.gamma = 1.0;
        c.agent.config.alpha = 0.01;
        c.total_steps = 400;
        assert_eq!(run_experiment(&c).unwrap(), run_experiment(&c).unwrap());
    }

    #[test]
    fn seeds_differ() {
        let groups = run_experiment(&tabular_mdp(Algorithm::QLearning)).unwrap();
        assert_ne!(groups[0].runs[0].records, groups[0].runs[1].records);
    }

    #[test]
    fn sweep_over_initial_estimates_yields_three_groups() {
        let mut c = tabular_mdp(Algorithm::DifferentialQ);
        c.experiment = ExperimentKind::AvgRewardEstimate;
        c.total_steps = 50;
        let groups = run_experiment(&c).unwrap();
        let labels: Vec<_> = groups.iter().map(|g| g.label.as_str()).collect();
        assert_eq!(labels, vec!["t_rbar0_-0.25", "t_rbar0_0", "t_rbar0_0.25"]);
        for g in &groups {
            assert!(g.runs[0].records[0].r_bar.is_some());
        }
    }

    #[test]
    fn episodes_end_on_truncation() {
        let mut c = tabular_mdp(Algorithm::QLearning);
        c.env.kind = EnvKind::Pendulum;
        c.seeds = vec![3];
        c.total_steps = 450;
        let groups = run_experiment(&c).unwrap();
        let ends: Vec<u64> = groups[0].runs[0]
            .records
            .iter()
            .filter(|r| r.episode_return.is_some())
            .map(|r| r.step)
            .collect();
        assert_eq!(ends, vec![200, 400]);
    }

    #[test]
    fn bad_combination_is_rejected_before_stepping() {
        let mut c = tabular_mdp(Algorithm::DifferentialQ);
        c.env.kind = EnvKind::Pendulum;
        assert!(run_experiment(&c).unwrap_err().is_config());
    }

    #[test]
    fn a2c_linear_signs_agree() {
        let mut c = RunConfig::default();
        c.agent.algorithm = Algorithm::A2c;
        c.agent.value_fn = ValueFnKind::Linear;
        c.agent.config.eta = 1e-2;
        c.seeds = vec![9];
        c.total_steps = 400;
        let g = run_experiment(&c).unwrap();
        let s = g[0].runs[0].sign_agreement.unwrap();
        assert_eq!((s.agree, s.total), (400, 400));
    }
}
