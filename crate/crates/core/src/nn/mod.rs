//! Minimal dense network engine.
//!
//! Parameters live in one flat [`ParamVector`]; gradients are exact
//! reverse-mode accumulations over that same layout. All arithmetic is `f64`.

mod loss;
mod mlp;
mod optim;
mod params;

pub use loss::{smooth_l1, smooth_l1_derivative, LossSpec};
pub use mlp::{
    glorot_init, mlp_backward, mlp_forward, mlp_gradient, HiddenActivation, Mlp, MlpSpec,
    OutputActivation,
};
pub use optim::{optimizer_step, polyak_in_place, polyak_update, AdamState, Optimizer, OptimizerKind};
pub use params::ParamVector;
