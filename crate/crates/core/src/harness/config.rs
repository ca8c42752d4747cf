use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::agents::{AdvantageRule, AgentConfig, ArRule, LossKind};
use crate::error::{Error, Result};
use crate::nn::OptimizerKind;

/// Environment variable that overrides the configured output directory.
pub const OUT_DIR_ENV: &str = "TDLAB_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    TdDivergence,
    AvgRewardEstimate,
    Performance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Discounted Q-learning (tabular updates or DQN).
    QLearning,
    /// Average-reward Q-learning (tabular) or differential DQN.
    DifferentialQ,
    /// Discounted Q-learning on rewards centred by `R̄`.
    CenteredQ,
    A2c,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueFnKind {
    Tabular,
    Linear,
    Mlp,
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Pendulum,
    ContinuingPendulum,
    RandomMdp,
    Ring,
    Swap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum OptimizerName {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum LossName {
    Mse,
    SmoothL1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RuleName {
    Implicit,
    Explicit,
    SmallestMagnitude,
    None,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RunSection {
    name: String,
    experiment: ExperimentKind,
    seeds: Vec<u64>,
    total_steps: u64,
    metric_window: usize,
    output_dir: String,
    r_bar0_sweep: Vec<f64>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            name: "run".into(),
            experiment: ExperimentKind::TdDivergence,
            seeds: vec![1, 2, 3, 4],
            total_steps: 20_000,
            metric_window: 500,
            output_dir: "out".into(),
            r_bar0_sweep: vec![-0.25, 0.0, 0.25],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct AgentSection {
    algorithm: Algorithm,
    value_fn: ValueFnKind,
    alpha: f64,
    eta: f64,
    gamma: f64,
    lambda: f64,
    batch_size: usize,
    tau_polyak: f64,
    update_period: usize,
    target_update_period: usize,
    optimizer: OptimizerName,
    loss: LossName,
    epsilon: f64,
    ar_rule: RuleName,
    r_bar0: f64,
    replay: bool,
    replay_min: usize,
    replay_capacity: usize,
    hidden: Vec<usize>,
    tilings: usize,
    tiles_per_dim: usize,
    normalize: bool,
    grid_theta: usize,
    grid_speed: usize,
    advantage: RuleName,
    actor_hidden: Vec<usize>,
}

impl Default for AgentSection {
    fn default() -> Self {
        let base = AgentConfig::default();
        Self {
            algorithm: Algorithm::QLearning,
            value_fn: ValueFnKind::Linear,
            alpha: base.alpha,
            eta: base.eta,
            gamma: base.gamma,
            lambda: base.lambda,
            batch_size: base.batch_size,
            tau_polyak: base.tau_polyak,
            update_period: base.update_period,
            target_update_period: base.target_update_period,
            optimizer: OptimizerName::Sgd,
            loss: LossName::Mse,
            epsilon: 0.1,
            ar_rule: RuleName::None,
            r_bar0: 0.0,
            replay: true,
            replay_min: 100,
            replay_capacity: 100_000,
            hidden: vec![32, 32],
            tilings: 32,
            tiles_per_dim: 8,
            normalize: true,
            grid_theta: 32,
            grid_speed: 32,
            advantage: RuleName::Implicit,
            actor_hidden: vec![32],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct EnvSection {
    kind: EnvKind,
    mdp_seed: u64,
    num_states: usize,
    num_actions: usize,
    ergodic: bool,
    ring_size: usize,
    advance_prob: f64,
}

impl Default for EnvSection {
    fn default() -> Self {
        Self {
            kind: EnvKind::Pendulum,
            mdp_seed: 0,
            num_states: 10,
            num_actions: 3,
            ergodic: true,
            ring_size: 5,
            advance_prob: 0.9,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    run: RunSection,
    #[serde(default)]
    agent: AgentSection,
    #[serde(default)]
    env: EnvSection,
}

/// Everything the driver needs to build a learner.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentSpec {
    pub algorithm: Algorithm,
    pub value_fn: ValueFnKind,
    pub config: AgentConfig,
    pub epsilon: f64,
    pub ar_rule: ArRule,
    pub r_bar0: f64,
    /// `false` means online updates on the latest transition (B = 1).
    pub replay: bool,
    pub replay_min: usize,
    pub replay_capacity: usize,
    pub hidden: Vec<usize>,
    pub tilings: usize,
    pub tiles_per_dim: usize,
    pub normalize: bool,
    pub grid_theta: usize,
    pub grid_speed: usize,
    pub advantage: AdvantageRule,
    pub actor_hidden: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub kind: EnvKind,
    pub mdp_seed: u64,
    pub num_states: usize,
    pub num_actions: usize,
    pub ergodic: bool,
    pub ring_size: usize,
    pub advance_prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub name: String,
    pub experiment: ExperimentKind,
    pub agent: AgentSpec,
    pub env: EnvSpec,
    pub seeds: Vec<u64>,
    pub total_steps: u64,
    pub metric_window: usize,
    pub output_dir: PathBuf,
    /// Initial estimates swept by the average-reward experiment.
    pub r_bar0_sweep: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        ConfigFile::default().into_config().expect("defaults are valid")
    }
}

impl ConfigFile {
    fn into_config(self) -> Result<RunConfig> {
        let a = self.agent;
        let rule = |r: RuleName| match r {
            RuleName::Implicit => ArRule::Implicit,
            RuleName::Explicit => ArRule::Explicit,
            RuleName::SmallestMagnitude => ArRule::SmallestMagnitude,
            RuleName::None => ArRule::None,
        };
        let advantage = match a.advantage {
            RuleName::Implicit => AdvantageRule::Implicit,
            RuleName::Explicit => AdvantageRule::Explicit,
            other => {
                return Err(Error::config(format!(
                    "advantage must be implicit or explicit, got {other:?}"
                )))
            }
        };
        let cfg = RunConfig {
            name: self.run.name,
            experiment: self.run.experiment,
            agent: AgentSpec {
                algorithm: a.algorithm,
                value_fn: a.value_fn,
                config: AgentConfig {
                    alpha: a.alpha,
                    eta: a.eta,
                    gamma: a.gamma,
                    lambda: a.lambda,
                    batch_size: a.batch_size,
                    tau_polyak: a.tau_polyak,
                    update_period: a.update_period,
                    target_update_period: a.target_update_period,
                    optimizer: match a.optimizer {
                        OptimizerName::Sgd => OptimizerKind::Sgd,
                        OptimizerName::Adam => OptimizerKind::Adam,
                    },
                    loss: match a.loss {
                        LossName::Mse => LossKind::MeanSquare,
                        LossName::SmoothL1 => LossKind::SmoothL1,
                    },
                },
                epsilon: a.epsilon,
                ar_rule: rule(a.ar_rule),
                r_bar0: a.r_bar0,
                replay: a.replay,
                replay_min: a.replay_min,
                replay_capacity: a.replay_capacity,
                hidden: a.hidden,
                tilings: a.tilings,
                tiles_per_dim: a.tiles_per_dim,
                normalize: a.normalize,
                grid_theta: a.grid_theta,
                grid_speed: a.grid_speed,
                advantage,
                actor_hidden: a.actor_hidden,
            },
            env: EnvSpec {
                kind: self.env.kind,
                mdp_seed: self.env.mdp_seed,
                num_states: self.env.num_states,
                num_actions: self.env.num_actions,
                ergodic: self.env.ergodic,
                ring_size: self.env.ring_size,
                advance_prob: self.env.advance_prob,
            },
            seeds: self.run.seeds,
            total_steps: self.run.total_steps,
            metric_window: self.run.metric_window,
            output_dir: PathBuf::from(self.run.output_dir),
            r_bar0_sweep: self.run.r_bar0_sweep,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        file.into_config()
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Parses `text` after overriding `[section] key = value` entries.
    pub fn from_toml_with_overrides(text: &str, overrides: &[(String, toml::Value)]) -> Result<Self> {
        let mut doc: toml::Table = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        for (key, value) in overrides {
            let (section, field) = key.split_once('.').unwrap_or(("agent", key.as_str()));
            let table = doc
                .entry(section.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            let toml::Value::Table(t) = table else {
                return Err(Error::config(format!("[{section}] is not a section")));
            };
            t.insert(field.to_string(), value.clone());
        }
        let file: ConfigFile = doc.try_into().map_err(|e: toml::de::Error| Error::config(e.to_string()))?;
        file.into_config()
    }

    /// Applies the output-directory override from the environment, if set.
    pub fn with_env_overrides(mut self) -> Self {
        if let Some(dir) = std::env::var_os(OUT_DIR_ENV) {
            if !dir.is_empty() {
                self.output_dir = PathBuf::from(dir);
            }
        }
        self
    }

    /// Checks everything that can be checked before a single step is taken.
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("at least one seed is required"));
        }
        if self.total_steps == 0 {
            return Err(Error::config("total_steps must be positive"));
        }
        if self.metric_window == 0 {
            return Err(Error::config("metric_window must be positive"));
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::config("run name must be a plain file stem"));
        }
        let a = &self.agent;
        a.config.validate()?;
        if !(0.0..=1.0).contains(&a.epsilon) {
            return Err(Error::config("epsilon must lie in [0, 1]"));
        }
        if !a.r_bar0.is_finite() {
            return Err(Error::config("r_bar0 must be finite"));
        }
        if a.hidden.contains(&0) || a.actor_hidden.contains(&0) {
            return Err(Error::config("hidden layer widths must be positive"));
        }
        if a.tilings == 0 || a.tiles_per_dim == 0 || a.grid_theta == 0 || a.grid_speed == 0 {
            return Err(Error::config("tiling and grid sizes must be positive"));
        }
        if a.replay && (a.replay_min == 0 || a.replay_min > a.replay_capacity) {
            return Err(Error::config("need 0 < replay_min ≤ replay_capacity"));
        }

        let e = &self.env;
        let pendulum = matches!(e.kind, EnvKind::Pendulum | EnvKind::ContinuingPendulum);
        let continuing = e.kind != EnvKind::Pendulum;
        match e.kind {
            EnvKind::RandomMdp if e.num_states < 2 || e.num_actions < 2 => {
                return Err(Error::config("random MDPs need at least 2 states and 2 actions"))
            }
            EnvKind::Ring if e.ring_size < 2 || !(0.0..=1.0).contains(&e.advance_prob) => {
                return Err(Error::config("ring needs ring_size ≥ 2 and advance_prob in [0, 1]"))
            }
            _ => {}
        }

        match a.algorithm {
            Algorithm::DifferentialQ => {
                if !continuing {
                    return Err(Error::config(
                        "differential learners need a continuing task (use continuing_pendulum or an MDP)",
                    ));
                }
                if a.value_fn != ValueFnKind::Tabular && a.config.gamma != 1.0 {
                    return Err(Error::config("differential DQN targets are undiscounted; set gamma = 1"));
                }
                if a.ar_rule == ArRule::None {
                    return Err(Error::config("differential learners need an average-reward rule"));
                }
            }
            Algorithm::CenteredQ => {
                if a.ar_rule == ArRule::None {
                    return Err(Error::config("reward centring needs an average-reward rule"));
                }
            }
            Algorithm::QLearning => {
                if a.ar_rule != ArRule::None {
                    return Err(Error::config("discounted Q-learning takes ar_rule = none"));
                }
            }
            Algorithm::A2c => {
                if !pendulum {
                    return Err(Error::config("A2C drives the continuous-action pendulum only"));
                }
                if !matches!(a.value_fn, ValueFnKind::Linear | ValueFnKind::Mlp) {
                    return Err(Error::config("A2C critics are linear or mlp"));
                }
            }
        }
        if self.experiment == ExperimentKind::AvgRewardEstimate {
            if a.algorithm != Algorithm::DifferentialQ && a.algorithm != Algorithm::CenteredQ {
                return Err(Error::config(
                    "avg_reward_estimate needs a differential or centred learner",
                ));
            }
            if self.r_bar0_sweep.is_empty() || self.r_bar0_sweep.iter().any(|r| !r.is_finite()) {
                return Err(Error::config("r_bar0_sweep must hold finite values"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_hyperparameters() {
        let c = RunConfig::default();
        assert_eq!(c.agent.config.gamma, 0.99);
        assert_eq!(c.agent.config.alpha, 2e-4);
        assert_eq!(c.agent.epsilon, 0.1);
        assert_eq!(c.agent.config.batch_size, 32);
        assert_eq!((c.agent.replay_min, c.agent.replay_capacity), (100, 100_000));
        assert_eq!(c.agent.config.tau_polyak, 0.005);
        assert_eq!((c.agent.tilings, c.agent.tiles_per_dim), (32, 8));
        assert_eq!(c.metric_window, 500);
        assert_eq!(c.r_bar0_sweep, vec![-0.25, 0.0, 0.25]);
    }

    #[test]
    fn parses_sections() {
        let c = RunConfig::from_toml_str(
            r#"
            [run]
            name = "mlp"
            seeds = [7, 8]
            total_steps = 100
            [agent]
            algorithm = "differential_q"
            value_fn = "mlp"
            gamma = 1.0
            ar_rule = "implicit"
            optimizer = "adam"
            loss = "smooth_l1"
            [env]
            kind = "random_mdp"
            num_states = 10
            "#,
        )
        .unwrap();
        assert_eq!(c.seeds, vec![7, 8]);
        assert_eq!(c.agent.ar_rule, ArRule::Implicit);
        assert_eq!(c.agent.config.optimizer, OptimizerKind::Adam);
        assert_eq!(c.env.kind, EnvKind::RandomMdp);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_combinations() {
        assert!(RunConfig::from_toml_str("[agent]\nalpah = 0.1\n").unwrap_err().is_config());
        let episodic_differential = "[agent]\nalgorithm = \"differential_q\"\nvalue_fn = \"tabular\"\nar_rule = \"explicit\"\n[env]\nkind = \"pendulum\"\n";
        assert!(RunConfig::from_toml_str(episodic_differential).unwrap_err().is_config());
        assert!(RunConfig::from_toml_str("[run]\nseeds = []\n").is_err());
        assert!(RunConfig::from_toml_str("[run]\ntotal_steps = 0\n").is_err());
        let a2c_mdp = "[agent]\nalgorithm = \"a2c\"\n[env]\nkind = \"random_mdp\"\n";
        assert!(RunConfig::from_toml_str(a2c_mdp).is_err());
    }

    #[test]
    fn overrides_apply() {
        let c = RunConfig::from_toml_with_overrides(
            "[agent]\nalpha = 0.1\n",
            &[("alpha".into(), toml::Value::Float(0.5)), ("run.total_steps".into(), toml::Value::Integer(9))],
        )
        .unwrap();
        assert_eq!(c.agent.config.alpha, 0.5);
        assert_eq!(c.total_steps, 9);
    }
}
