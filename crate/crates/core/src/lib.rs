//! Soft actor-critic with imitation learning from demonstrations, applied to
//! longitudinal control on a deterministic roundabout micro-simulator.
//!
//! The crate is organised by subsystem:
//!
//! - [`numerics`]: dense networks with manual backpropagation, Adam and the
//!   tanh-squashed Gaussian policy head.
//! - [`env`]: the roundabout simulator, detection zones and reward.
//! - [`replay`]: prioritized sum-tree buffers and the adaptive expert/agent
//!   mixing ratio.
//! - [`learner`]: twin-Q / value / policy updates with the Q-filtered
//!   imitation loss and automatic temperature tuning.
//! - [`demos`]: scripted expert, trajectory files, behavior cloning and the
//!   live demonstration bridge.
//! - [`run`]: training and evaluation loops shared by the CLI and the tests.

pub mod demos;
pub mod env;
pub mod error;
pub mod learner;
pub mod numerics;
pub mod par;
pub mod replay;
pub mod run;

pub use error::{Error, Result};
