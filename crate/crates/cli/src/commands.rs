use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;

use sacfd_core::demos::bridge::{serve_blocking, BridgeConfig};
use sacfd_core::demos::{
    bc_train, demo_files, episode_path, load_demo_set, record_episode, BcEpoch, Controller, PolicyController,
    ScriptedController, Trajectory,
};
use sacfd_core::env::{RoundaboutEnv, TerminalCause};
use sacfd_core::learner::{Checkpoint, LearnerState, CHECKPOINT_VERSION};
use sacfd_core::replay::{PriorityParams, RatioState};
use sacfd_core::run::plot::{render_svg, smooth, Series};
use sacfd_core::run::{
    eval_seeds, evaluate, hex_digest, read_metrics, train, EvalController, EvalReport, RunConfig, RunPaths,
    METRICS_SCHEMA_VERSION,
};
use sacfd_core::{par, Error, Result};

use crate::{Command, Common, ControllerKind};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Train {
            common,
            seed,
            steps,
            no_demos,
            bc,
            demos,
            min_demo_reward,
            out,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(s) = steps {
                cfg.train.total_steps = s;
            }
            cfg.train.demos = !no_demos;
            if min_demo_reward.is_some() {
                cfg.train.min_demo_reward = min_demo_reward;
            }
            for s in seed {
                let dir = out.join(format!("seed_{s}"));
                if bc {
                    cmd_bc(&cfg, s, &demos, &dir)?;
                } else {
                    cmd_train(&cfg, s, &demos, &dir)?;
                }
            }
            Ok(())
        }
        Command::Eval {
            common,
            checkpoint,
            expert,
            episodes,
            seed,
            out,
        } => {
            let cfg = load_config(&common)?;
            let controller = match (expert, checkpoint) {
                (true, _) => EvalController::Scripted(cfg.expert),
                (false, Some(path)) => {
                    let ck = Checkpoint::load(&path)?;
                    check_hash(&ck, &cfg)?;
                    EvalController::Policy(ck.learner.policy)
                }
                (false, None) => return Err(Error::Config("eval needs --checkpoint or --expert".into())),
            };
            let report = evaluate(&cfg.env, &controller, &eval_seeds(seed, episodes))?;
            print_report(&report);
            if let Some(out) = out {
                write_json(&out, &report)?;
            }
            Ok(())
        }
        Command::Record {
            common,
            controller,
            checkpoint,
            episodes,
            seed,
            out,
        } => {
            let cfg = load_config(&common)?;
            let mut ctrl: Box<dyn Controller> = match controller {
                ControllerKind::Scripted => Box::new(ScriptedController(cfg.expert)),
                ControllerKind::Policy => {
                    let path = checkpoint.ok_or_else(|| Error::Config("--controller policy needs --checkpoint".into()))?;
                    let ck = Checkpoint::load(&path)?;
                    check_hash(&ck, &cfg)?;
                    Box::new(PolicyController(ck.learner.policy))
                }
            };
            cmd_record(&cfg, ctrl.as_mut(), episodes, seed, &out)
        }
        Command::Serve {
            common,
            port,
            seed,
            tick_ms,
            autosave,
            episodes,
            out,
        } => {
            let cfg = load_config(&common)?;
            let tick = Duration::from_millis(tick_ms.unwrap_or((cfg.env.dt * 1000.0).round() as u64));
            let env = RoundaboutEnv::new(cfg.env.clone())?;
            let bridge = BridgeConfig {
                out_dir: out,
                seed,
                tick,
                autosave,
                max_episodes: episodes,
            };
            let summary = serve_blocking(env, port, bridge, |p| println!("listening on ws://127.0.0.1:{p}"))?;
            println!("saved {} episode(s), discarded {}", summary.saved.len(), summary.discarded);
            Ok(())
        }
        Command::Plot {
            runs,
            labels,
            expert_mean,
            demos,
            window,
            out,
        } => cmd_plot(&runs, &labels, expert_mean, demos.as_deref(), window, &out),
    }
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.env.shield.enabled |= common.shield;
    Ok(cfg)
}

fn check_hash(ck: &Checkpoint, cfg: &RunConfig) -> Result<()> {
    let want = cfg.env.dynamics_hash();
    if ck.env_hash != want {
        return Err(Error::Config(format!(
            "checkpoint was trained on environment {} but the config describes {want}",
            ck.env_hash
        )));
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn print_report(r: &EvalReport) {
    println!(
        "episodes {}  shield {}  success {:.3}  collision {:.3}  timeout {:.3}  return {:.1} ± {:.1}  length {:.1} ± {:.1} s",
        r.episodes, r.shield, r.success_rate, r.collision_rate, r.timeout_rate, r.reward_mean, r.reward_sd, r.length_mean, r.length_sd
    );
}

#[derive(Serialize)]
struct DemoFileMeta {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct RunMeta<'a> {
    mode: &'a str,
    seed: u64,
    code_version: &'a str,
    metrics_schema: u32,
    parallel: bool,
    config_hash: String,
    env_hash: String,
    demo_files: Vec<DemoFileMeta>,
    config: &'a RunConfig,
}

fn demo_meta(paths: &[PathBuf]) -> Result<Vec<DemoFileMeta>> {
    paths
        .iter()
        .map(|p| {
            let bytes = fs::read(p).map_err(|e| Error::io(p, e))?;
            Ok(DemoFileMeta {
                path: p.display().to_string(),
                sha256: hex_digest(&bytes),
            })
        })
        .collect()
}

fn load_demos(cfg: &RunConfig, dir: &Path) -> Result<(sacfd_core::demos::DemoSet, Vec<PathBuf>)> {
    let files = demo_files(dir).map_err(|e| Error::Config(format!("demonstrations enabled but {dir:?} is unreadable: {e}")))?;
    if files.is_empty() {
        return Err(Error::Config(format!("demonstrations enabled but {} holds no .jsonl files", dir.display())));
    }
    let set = load_demo_set(&files, Some(&cfg.env.dynamics_hash()), cfg.train.min_demo_reward, PriorityParams::default())?;
    for s in &set.skipped {
        log::info!("skipped {} (below the minimum demo reward)", s.display());
    }
    Ok((set, files))
}

fn write_meta(dir: &Path, mode: &str, seed: u64, cfg: &RunConfig, demos: &[PathBuf]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = RunMeta {
        mode,
        seed,
        code_version: env!("CARGO_PKG_VERSION"),
        metrics_schema: METRICS_SCHEMA_VERSION,
        parallel: par::is_parallel(),
        config_hash: cfg.hash(),
        env_hash: cfg.env.dynamics_hash(),
        demo_files: demo_meta(demos)?,
        config: cfg,
    };
    write_json(&RunPaths::new(dir).meta(), &meta)
}

fn cmd_train(cfg: &RunConfig, seed: u64, demos_dir: &Path, dir: &Path) -> Result<()> {
    let (demos, files) = if cfg.train.demos {
        let (set, files) = load_demos(cfg, demos_dir)?;
        (Some(set), files)
    } else {
        (None, Vec::new())
    };
    let mode = if cfg.train.demos { "sac-fd" } else { "sac" };
    write_meta(dir, mode, seed, cfg, &files)?;
    let paths = RunPaths::new(dir);
    let outcome = train(cfg, seed, demos, Some(&paths))?;
    println!(
        "{mode} seed {seed}: {} episodes, best training return {:.1} at episode {}, final rho {:.4}",
        outcome.metrics.len(),
        outcome.best.episode_return,
        outcome.best.episodes,
        outcome.last.ratio.rho
    );
    if let Some(e) = outcome.evals.last() {
        println!("last eval at step {}: success {:.3} collision {:.3}", e.step, e.success_rate, e.collision_rate);
    }
    println!("run directory: {}", dir.display());
    Ok(())
}

fn cmd_bc(cfg: &RunConfig, seed: u64, demos_dir: &Path, dir: &Path) -> Result<()> {
    let (set, files) = load_demos(cfg, demos_dir)?;
    write_meta(dir, "bc", seed, cfg, &files)?;
    let data: Vec<_> = set.buffer.transitions().iter().map(|t| (t.state, t.action)).collect();
    let result = bc_train(&data, &cfg.bc, seed)?;
    let bc_csv = dir.join("bc.csv");
    let mut w = csv::Writer::from_path(&bc_csv).map_err(Error::from)?;
    for e in &result.epochs {
        w.serialize(e).map_err(Error::from)?;
    }
    w.flush().map_err(|e| Error::io(&bc_csv, e))?;
    if let Some(BcEpoch { heldout_mse, train_loss, .. }) = result.epochs.last() {
        println!("bc seed {seed}: final train loss {train_loss:.5}, held-out mse {heldout_mse:.5}");
    }
    let mut learner = LearnerState::new(cfg.learner.clone(), seed)?;
    learner.policy = result.policy;
    let ck = Checkpoint {
        version: CHECKPOINT_VERSION,
        env_hash: cfg.env.dynamics_hash(),
        learner,
        ratio: RatioState::new(Some(set.mean_reward)),
        env_steps: 0,
        episodes: 0,
        episode_return: f64::NAN,
    };
    let paths = RunPaths::new(dir);
    ck.save(&paths.best())?;
    ck.save(&paths.last())?;
    println!("run directory: {}", dir.display());
    Ok(())
}

fn cmd_record(cfg: &RunConfig, controller: &mut dyn Controller, episodes: usize, seed: u64, out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut env = RoundaboutEnv::new(cfg.env.clone())?;
    let (mut success, mut total) = (0usize, 0.0);
    for k in 0..episodes {
        let traj: Trajectory = record_episode(controller, &mut env, seed + k as u64)?;
        traj.save(&episode_path(out, k))?;
        success += (traj.header.cause == TerminalCause::Destination) as usize;
        total += traj.header.episodic_reward;
    }
    println!(
        "recorded {episodes} episode(s) to {}: success {success}/{episodes}, mean return {:.1}",
        out.display(),
        total / episodes.max(1) as f64
    );
    Ok(())
}

fn cmd_plot(runs: &[PathBuf], labels: &[String], expert_mean: Option<f64>, demos: Option<&Path>, window: usize, out: &Path) -> Result<()> {
    if !labels.is_empty() && labels.len() != runs.len() {
        return Err(Error::Config(format!("{} labels for {} runs", labels.len(), runs.len())));
    }
    let mut series = Vec::new();
    for (k, dir) in runs.iter().enumerate() {
        let rows = read_metrics(&RunPaths::new(dir).metrics())?;
        let label = labels.get(k).cloned().unwrap_or_else(|| run_label(dir));
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.step as f64, r.episode_return)).collect();
        series.push(Series {
            label,
            points: smooth(&pts, window),
        });
    }
    let expert = match (expert_mean, demos) {
        (Some(m), _) => Some(m),
        (None, Some(dir)) => {
            let files = demo_files(dir)?;
            Some(load_demo_set(&files, None, None, PriorityParams::default())?.mean_reward)
        }
        (None, None) => None,
    };
    let svg = render_svg(&series, expert, "Episode return during training");
    fs::write(out, svg).map_err(|e| Error::io(out, e))?;
    println!("wrote {}", out.display());
    Ok(())
}

/// "<mode> seed <n>" from run.json, or the directory name.
fn run_label(dir: &Path) -> String {
    let meta = fs::read_to_string(RunPaths::new(dir).meta())
        .ok()
        .and_then(|t| serde_json::from_str::<serde_json::Value>(&t).ok());
    match meta {
        Some(m) => format!("{} seed {}", m["mode"].as_str().unwrap_or("run"), m["seed"]),
        None => dir.file_name().map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned()),
    }
}
