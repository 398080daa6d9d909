use std::fs;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::eval::{eval_seeds, evaluate, EvalController};
use crate::demos::DemoSet;
use crate::env::{RoundaboutEnv, TerminalCause};
use crate::error::{Error, Result};
use crate::learner::{Checkpoint, LearnerState, LossReport, CHECKPOINT_VERSION};
use crate::replay::{update_ratio, PrioritizedBuffer, PriorityParams, RatioState, Source, Transition, AGENT_CAPACITY};

pub const METRICS_SCHEMA_VERSION: u32 = 1;

/// One row per finished training episode. Loss columns average the updates
/// run during the episode; they are empty while warming up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub step: u64,
    pub episode: u64,
    pub episode_return: f64,
    pub episode_steps: u32,
    pub cause: TerminalCause,
    pub rho: f64,
    pub ratio_raised: bool,
    pub alpha: f64,
    pub agent_buffer: usize,
    pub expert_buffer: usize,
    pub updates: usize,
    pub q1_loss: Option<f64>,
    pub q2_loss: Option<f64>,
    pub value_loss: Option<f64>,
    pub policy_rl_loss: Option<f64>,
    pub policy_il_loss: Option<f64>,
    pub alpha_loss: Option<f64>,
    pub filter_pass: Option<f64>,
    pub agent_samples: Option<f64>,
    pub expert_samples: Option<f64>,
    pub floored: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub step: u64,
    pub episodes: usize,
    pub success_rate: f64,
    pub collision_rate: f64,
    pub timeout_rate: f64,
    pub reward_mean: f64,
    pub length_mean: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub metrics: Vec<MetricsRow>,
    pub evals: Vec<EvalRow>,
    pub best: Checkpoint,
    pub last: Checkpoint,
}

/// Where a run writes its artifacts.
#[derive(Debug, Clone)]
pub struct RunPaths {
    pub dir: PathBuf,
}

impl RunPaths {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }
    pub fn metrics(&self) -> PathBuf {
        self.dir.join("metrics.csv")
    }
    pub fn evals(&self) -> PathBuf {
        self.dir.join("eval.csv")
    }
    pub fn best(&self) -> PathBuf {
        self.dir.join("best.json")
    }
    pub fn last(&self) -> PathBuf {
        self.dir.join("last.json")
    }
    pub fn meta(&self) -> PathBuf {
        self.dir.join("run.json")
    }
}

#[derive(Default)]
struct EpisodeAccum {
    reports: Vec<LossReport>,
}

fn mean_of(reports: &[LossReport], f: impl Fn(&LossReport) -> Option<f64>) -> Option<f64> {
    let vals: Vec<f64> = reports.iter().filter_map(f).collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

impl EpisodeAccum {
    fn row(&self, base: MetricsRow) -> MetricsRow {
        let r: Vec<LossReport> = self.reports.iter().filter(|r| !r.warming_up).copied().collect();
        MetricsRow {
            updates: r.len(),
            q1_loss: mean_of(&r, |x| Some(x.q1_loss)),
            q2_loss: mean_of(&r, |x| Some(x.q2_loss)),
            value_loss: mean_of(&r, |x| Some(x.value_loss)),
            policy_rl_loss: mean_of(&r, |x| Some(x.policy_rl_loss)),
            policy_il_loss: mean_of(&r, |x| Some(x.policy_il_loss)),
            alpha_loss: mean_of(&r, |x| Some(x.alpha_loss)),
            filter_pass: mean_of(&r, |x| x.filter_pass),
            agent_samples: mean_of(&r, |x| Some(x.agent_samples as f64)),
            expert_samples: mean_of(&r, |x| Some(x.expert_samples as f64)),
            floored: r.iter().map(|x| x.floored).sum(),
            skipped: r.iter().map(|x| x.skipped).sum(),
            ..base
        }
    }
}

struct CsvSink<T> {
    writer: Option<csv::Writer<fs::File>>,
    _row: std::marker::PhantomData<T>,
}

impl<T: Serialize> CsvSink<T> {
    fn open(path: Option<PathBuf>) -> Result<Self> {
        let writer = match path {
            Some(p) => Some(csv::Writer::from_path(&p)?),
            None => None,
        };
        Ok(Self {
            writer,
            _row: std::marker::PhantomData,
        })
    }

    fn write(&mut self, row: &T) -> Result<()> {
        if let Some(w) = &mut self.writer {
            w.serialize(row)?;
            w.flush().map_err(|e| Error::io("metrics", e))?;
        }
        Ok(())
    }
}

/// Independent random streams derived from the run seed.
fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Runs SAC training: stochastic rollouts, one update per env
/// step after warmup, ratio update and checkpoint at every episode end.
///
/// `demos` must be present exactly when `config.train.demos` is set. With
/// `out`, metrics, periodic evaluations and checkpoints are written there.
pub fn train(config: &RunConfig, seed: u64, demos: Option<DemoSet>, out: Option<&RunPaths>) -> Result<TrainOutcome> {
    config.validate()?;
    let settings = &config.train;
    let (mut expert, expert_mean) = match (settings.demos, demos) {
        (true, Some(d)) => {
            if d.env_hash != config.env.dynamics_hash() {
                return Err(Error::Config(format!(
                    "demonstrations were recorded on environment {} but the run uses {}",
                    d.env_hash,
                    config.env.dynamics_hash()
                )));
            }
            log::info!("expert buffer: {} transitions, mean return {:.3}", d.buffer.len(), d.mean_reward);
            (Some(d.buffer), Some(d.mean_reward))
        }
        (true, None) => return Err(Error::Config("demonstrations are enabled but none were provided".into())),
        (false, _) => (None, None),
    };
    let mut ratio = RatioState::new(expert_mean);
    if let Some(p) = out {
        fs::create_dir_all(&p.dir).map_err(|e| Error::io(&p.dir, e))?;
    }

    let mut env_cfg = config.env.clone();
    env_cfg.seed = seed;
    let mut env = RoundaboutEnv::new(env_cfg)?;
    let env_hash = config.env.dynamics_hash();
    let mut learner = LearnerState::new(config.learner.clone(), seed)?;
    let mut agent = PrioritizedBuffer::new(AGENT_CAPACITY, PriorityParams::default());
    let mut action_rng = stream(seed, 1);
    let mut update_rng = stream(seed, 2);
    let mut episode_seeds = stream(seed, 3);

    let mut metrics_sink = CsvSink::<MetricsRow>::open(out.map(|p| p.metrics()))?;
    let mut eval_sink = CsvSink::<EvalRow>::open(out.map(|p| p.evals()))?;
    let mut metrics = Vec::new();
    let mut evals = Vec::new();
    let snapshot = |learner: &LearnerState, ratio: &RatioState, steps: u64, episodes: u64, ret: f64| Checkpoint {
        version: CHECKPOINT_VERSION,
        env_hash: env_hash.clone(),
        learner: learner.clone(),
        ratio: *ratio,
        env_steps: steps,
        episodes,
        episode_return: ret,
    };
    let mut best: Option<Checkpoint> = None;

    let mut episode = 0u64;
    let mut obs = env.reset(episode_seeds.next_u64());
    let mut accum = EpisodeAccum::default();
    let mut ep_return = 0.0;
    for step in 1..=settings.total_steps {
        let action = learner.act(&obs, &mut action_rng)?;
        let out_step = env.step(action)?;
        agent.push(Transition {
            state: obs,
            action: out_step.applied_action,
            reward: out_step.reward,
            next_state: out_step.observation,
            done: out_step.terminal && out_step.cause != TerminalCause::Timeout,
            source: Source::Agent,
        })?;
        ep_return += out_step.reward;
        obs = out_step.observation;
        accum.reports.push(learner.train_step(&mut agent, expert.as_mut(), &ratio, &mut update_rng)?);

        if out_step.terminal {
            let raised = update_ratio(&mut ratio, ep_return);
            episode += 1;
            let row = accum.row(MetricsRow {
                step,
                episode,
                episode_return: ep_return,
                episode_steps: env.world().step,
                cause: out_step.cause,
                rho: ratio.rho,
                ratio_raised: raised,
                alpha: learner.alpha(),
                agent_buffer: agent.len(),
                expert_buffer: expert.as_ref().map_or(0, |e| e.len()),
                updates: 0,
                q1_loss: None,
                q2_loss: None,
                value_loss: None,
                policy_rl_loss: None,
                policy_il_loss: None,
                alpha_loss: None,
                filter_pass: None,
                agent_samples: None,
                expert_samples: None,
                floored: 0,
                skipped: 0,
            });
            metrics_sink.write(&row)?;
            if episode.is_multiple_of(10) {
                log::info!(
                    "step {step} episode {episode}: return {ep_return:.1} ({}) rho {:.3} alpha {:.4}",
                    row.cause.as_str(),
                    ratio.rho,
                    learner.alpha()
                );
            }
            metrics.push(row);
            let ck = snapshot(&learner, &ratio, step, episode, ep_return);
            if let Some(p) = out {
                ck.save(&p.last())?;
            }
            if best.as_ref().is_none_or(|b| ep_return > b.episode_return) {
                if let Some(p) = out {
                    ck.save(&p.best())?;
                }
                best = Some(ck);
            }
            obs = env.reset(episode_seeds.next_u64());
            accum = EpisodeAccum::default();
            ep_return = 0.0;
        }

        if settings.eval_interval > 0 && step % settings.eval_interval == 0 {
            let report = evaluate(
                &config.env,
                &EvalController::Policy(learner.policy.clone()),
                &eval_seeds(0, settings.eval_episodes),
            )?;
            let row = EvalRow {
                step,
                episodes: report.episodes,
                success_rate: report.success_rate,
                collision_rate: report.collision_rate,
                timeout_rate: report.timeout_rate,
                reward_mean: report.reward_mean,
                length_mean: report.length_mean,
            };
            log::info!("eval at step {step}: success {:.2} collision {:.2}", row.success_rate, row.collision_rate);
            eval_sink.write(&row)?;
            evals.push(row);
        }
    }
    let last = snapshot(&learner, &ratio, settings.total_steps, episode, ep_return);
    if let Some(p) = out {
        last.save(&p.last())?;
    }
    Ok(TrainOutcome {
        metrics,
        evals,
        best: best.unwrap_or_else(|| last.clone()),
        last,
    })
}

/// Reads back a metrics file written by [`train`].
pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn read_evals(path: &Path) -> Result<Vec<EvalRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}
