//! Running a controller through one episode and capturing it as a trajectory.

use crate::env::{Observation, RoundaboutEnv};
use crate::error::Result;
use crate::numerics::ParameterSet;
use crate::learner::policy_mean_action;

use super::expert::{scripted_expert_action, ScriptedExpertConfig};
use super::trajectory::{reward_sum, DemoSource, Trajectory, TrajectoryHeader, TrajectoryStep, FORMAT_VERSION, OBSERVATION_VERSION};

/// Anything that picks a pedal action from the current world.
pub trait Controller {
    fn source(&self) -> DemoSource;
    fn act(&mut self, env: &RoundaboutEnv, obs: &Observation) -> Result<f64>;
}

pub struct ScriptedController(pub ScriptedExpertConfig);

impl Controller for ScriptedController {
    fn source(&self) -> DemoSource {
        DemoSource::Scripted
    }

    fn act(&mut self, env: &RoundaboutEnv, _obs: &Observation) -> Result<f64> {
        Ok(scripted_expert_action(&self.0, env))
    }
}

/// Deterministic `tanh(mu)` of a trained policy.
pub struct PolicyController(pub ParameterSet);

impl Controller for PolicyController {
    fn source(&self) -> DemoSource {
        DemoSource::Policy
    }

    fn act(&mut self, _env: &RoundaboutEnv, obs: &Observation) -> Result<f64> {
        policy_mean_action(&self.0, obs)
    }
}

/// Resets `env` with `seed` and drives one episode with `controller`. The
/// stored action is the one the env executed, so replaying it reproduces the
/// episode whether or not the shield was on.
pub fn record_episode(controller: &mut dyn Controller, env: &mut RoundaboutEnv, seed: u64) -> Result<Trajectory> {
    let mut obs = env.reset(seed);
    let mut steps = Vec::new();
    loop {
        let action = controller.act(env, &obs)?;
        let out = env.step(action)?;
        steps.push(TrajectoryStep {
            state: obs,
            action: out.applied_action,
            reward: out.reward,
            next_state: out.observation,
            done: out.terminal && out.cause != crate::env::TerminalCause::Timeout,
        });
        obs = out.observation;
        if out.terminal {
            return Ok(finish(env, seed, controller.source(), steps, out.cause));
        }
    }
}

pub(crate) fn finish(
    env: &RoundaboutEnv,
    seed: u64,
    source: DemoSource,
    steps: Vec<TrajectoryStep>,
    cause: crate::env::TerminalCause,
) -> Trajectory {
    Trajectory {
        header: TrajectoryHeader {
            format_version: FORMAT_VERSION,
            observation_version: OBSERVATION_VERSION,
            env_hash: env.config().dynamics_hash(),
            dt: env.config().dt,
            seed,
            source,
            episodic_reward: reward_sum(&steps),
            steps: steps.len(),
            cause,
        },
        steps,
    }
}

/// Replays recorded actions from the episode's seed and returns the observed
/// states, one per step plus the final one.
pub fn replay_actions(env: &mut RoundaboutEnv, seed: u64, actions: &[f64]) -> Result<Vec<Observation>> {
    let mut states = vec![env.reset(seed)];
    for &a in actions {
        states.push(env.step(a)?.observation);
    }
    Ok(states)
}
