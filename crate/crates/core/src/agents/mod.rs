//! Learners: tabular and differential Q-learning, the DQN family with
//! average-reward and reward-centring variants, and online A2C.

mod a2c;
mod config;
mod dqn;
mod estimator;
mod policy;
mod tabular;
mod value;

pub use a2c::{a2c_update, actor_loss, A2cLearner, A2cReport, AdvantageRule, ContinuousTransition, GaussianActor};
pub use config::{AgentConfig, LossKind};
pub use dqn::{dqn_update, DqnLearner, DqnMode, DqnStep};
pub use estimator::{smallest_magnitude_index, ArRule, AvgRewardEstimator};
pub use policy::{
    epsilon_greedy, log_one_minus_tanh_sq, select_action, squashed_gaussian_grad, squashed_gaussian_log_prob, Action,
    ActionSource, PolicySpec, SquashedSample, LOG_STD_MAX, LOG_STD_MIN,
};
pub use tabular::{tabular_differential_q_update, tabular_q_update, TabularStep};
pub use value::{sigmoid, FeatureEncoder, InputMap, LinearQ, MlpQ, SigmoidLinearQ, StateIndexer, TabularQ};
