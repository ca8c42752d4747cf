//! A laboratory for comparing the two readings of the temporal-difference error.
//!
//! The *explicit* TD error is a bootstrapped target minus a prediction. The
//! *implicit* TD error is the change in a prediction across one parameter
//! update, divided by the step size. They coincide for tabular learners and
//! drift apart under linear features, batching and nonlinear networks.
//!
//! Layout:
//!
//! - [`nn`]: dense MLP forward/backward, SGD and Adam, Polyak averaging, smooth L1.
//! - [`features`]: one-hot and tile-coded state-action features.
//! - [`tderr`]: explicit and implicit TD errors, linear closed forms, the
//!   average-reward error ledger.
//! - [`envs`]: random finite MDPs, ring and swap chains, the inverted pendulum.
//! - [`replay`]: uniform experience replay.
//! - [`agents`]: tabular and differential Q-learning, DQN variants, A2C.
//! - [`oracle`]: value iteration, exact average reward, finite differences.
//! - [`harness`]: seeded experiment driver, statistics, CSV/SVG output and
//!   the acceptance checks.

pub mod agents;
pub mod envs;
pub mod error;
pub mod features;
pub mod harness;
pub mod nn;
pub mod oracle;
pub mod replay;
pub mod rng;
pub mod tderr;

pub use error::{Error, Result};
