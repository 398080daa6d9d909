//! Demonstrations: scripted expert, trajectory files, expert-buffer loading,
//! behaviour cloning and the live driving bridge.

mod bc;
pub mod bridge;
mod dataset;
mod expert;
mod record;
mod trajectory;

pub use bc::{bc_train, BcConfig, BcEpoch, BcResult};
pub use dataset::{demo_files, load_demo_set, DemoSet};
pub use expert::{idm_acceleration, scripted_expert_action, zone_leader, Leader, ScriptedExpertConfig};
pub use record::{record_episode, replay_actions, Controller, PolicyController, ScriptedController};
pub use trajectory::{
    episode_path, reward_sum, DemoSource, Trajectory, TrajectoryHeader, TrajectoryStep, FORMAT_VERSION, OBSERVATION_VERSION,
};
