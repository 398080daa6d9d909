use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::demos::{scripted_expert_action, ScriptedExpertConfig};
use crate::env::{EnvConfig, RoundaboutEnv, TerminalCause};
use crate::error::Result;
use crate::learner::policy_mean_action;
use crate::numerics::ParameterSet;
use crate::par;

/// First seed of the evaluation episode stream. Training episodes draw their
/// seeds from a ChaCha stream, so this range is effectively disjoint.
pub const EVAL_SEED_BASE: u64 = 1 << 40;

pub fn eval_seeds(offset: u64, n: usize) -> Vec<u64> {
    (0..n as u64).map(|i| EVAL_SEED_BASE + offset + i).collect()
}

/// Deterministic controllers that can be evaluated side by side.
#[derive(Debug, Clone)]
pub enum EvalController {
    /// `tanh(mu(s))` of a policy network.
    Policy(ParameterSet),
    Scripted(ScriptedExpertConfig),
}

impl EvalController {
    fn act(&self, env: &RoundaboutEnv, obs: &crate::env::Observation) -> Result<f64> {
        match self {
            EvalController::Policy(p) => policy_mean_action(p, obs),
            EvalController::Scripted(c) => Ok(scripted_expert_action(c, env)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub seed: u64,
    pub cause: TerminalCause,
    pub reward: f64,
    pub steps: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub episodes: usize,
    pub shield: bool,
    pub success_rate: f64,
    pub collision_rate: f64,
    pub timeout_rate: f64,
    pub reward_mean: f64,
    pub reward_sd: f64,
    /// Episode length in seconds.
    pub length_mean: f64,
    pub length_sd: f64,
    pub outcomes: Vec<EpisodeOutcome>,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

pub fn rollout(controller: &EvalController, env: &mut RoundaboutEnv, seed: u64) -> Result<EpisodeOutcome> {
    let mut obs = env.reset(seed);
    let mut reward = 0.0;
    loop {
        let out = env.step(controller.act(env, &obs)?)?;
        reward += out.reward;
        obs = out.observation;
        if out.terminal {
            return Ok(EpisodeOutcome {
                seed,
                cause: out.cause,
                reward,
                steps: env.world().step,
            });
        }
    }
}

/// Runs one episode per seed, in parallel across independent envs.
pub fn evaluate(config: &EnvConfig, controller: &EvalController, seeds: &[u64]) -> Result<EvalReport> {
    let base = RoundaboutEnv::new(config.clone())?;
    let layout = Arc::clone(base.layout());
    let outcomes = par::map(seeds, |&seed| {
        let mut env = RoundaboutEnv::with_layout(config.clone(), Arc::clone(&layout))?;
        rollout(controller, &mut env, seed)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(summarize(config, outcomes))
}

pub fn summarize(config: &EnvConfig, outcomes: Vec<EpisodeOutcome>) -> EvalReport {
    let n = outcomes.len();
    let frac = |c: TerminalCause| outcomes.iter().filter(|o| o.cause == c).count() as f64 / n as f64;
    let rewards: Vec<f64> = outcomes.iter().map(|o| o.reward).collect();
    let lengths: Vec<f64> = outcomes.iter().map(|o| o.steps as f64 * config.dt).collect();
    let (reward_mean, reward_sd) = mean_sd(&rewards);
    let (length_mean, length_sd) = mean_sd(&lengths);
    EvalReport {
        episodes: n,
        shield: config.shield.enabled,
        success_rate: frac(TerminalCause::Destination),
        collision_rate: frac(TerminalCause::Collision),
        timeout_rate: frac(TerminalCause::Timeout),
        reward_mean,
        reward_sd,
        length_mean,
        length_sd,
        outcomes,
    }
}
