//! Minimal differentiable core: dense networks with hand-written backward
//! passes, Adam, and the tanh-squashed Gaussian policy head.

mod adam;
mod gaussian;
pub mod gradcheck;
mod mlp;

pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS, DEFAULT_LEARNING_RATE};
pub use gaussian::{
    deterministic_action, log_tanh_jacobian, mean_action_head_gradient, sample_tanh_gaussian,
    GaussianHeadOutput,
    TanhGaussianSample, LOG_STD_MAX, LOG_STD_MIN,
};
pub use mlp::{Activation, Cache, LayerShape, ParameterSet, HIDDEN_UNITS};

/// Numerically stable `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}
