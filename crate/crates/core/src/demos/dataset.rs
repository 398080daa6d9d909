//! Loading trajectory files into the expert buffer.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::replay::{PrioritizedBuffer, PriorityParams, Source, Transition};

use super::trajectory::Trajectory;

#[derive(Debug)]
pub struct DemoSet {
    pub buffer: PrioritizedBuffer,
    /// Mean header episodic reward over the loaded files.
    pub mean_reward: f64,
    pub files: Vec<PathBuf>,
    /// Files left out by the minimum-reward filter.
    pub skipped: Vec<PathBuf>,
    pub env_hash: String,
}

/// Every `*.jsonl` file in `dir`, sorted by name.
pub fn demo_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|x| x == "jsonl") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Loads and validates `paths`. All files must carry `expected_hash` (or,
/// when `None`, the hash of the first file). Episodes below `min_reward` are
/// skipped; at least one must remain.
pub fn load_demo_set(
    paths: &[PathBuf],
    expected_hash: Option<&str>,
    min_reward: Option<f64>,
    params: PriorityParams,
) -> Result<DemoSet> {
    let mut transitions: Vec<Transition> = Vec::new();
    let mut rewards = Vec::new();
    let mut files = Vec::new();
    let mut skipped = Vec::new();
    let mut hash: Option<String> = expected_hash.map(str::to_owned);
    for path in paths {
        let traj = Trajectory::load(path)?;
        match &hash {
            Some(h) if *h != traj.header.env_hash => {
                return Err(Error::Trajectory {
                    path: path.clone(),
                    reason: format!("environment hash {} does not match {h}", traj.header.env_hash),
                });
            }
            Some(_) => {}
            None => hash = Some(traj.header.env_hash.clone()),
        }
        if min_reward.is_some_and(|m| traj.header.episodic_reward < m) {
            skipped.push(path.clone());
            continue;
        }
        rewards.push(traj.header.episodic_reward);
        transitions.extend(traj.steps.iter().map(|s| s.to_transition(Source::Expert)));
        files.push(path.clone());
    }
    if files.is_empty() {
        return Err(Error::Contract("no demonstration episodes left to load".into()));
    }
    let mean_reward = rewards.iter().sum::<f64>() / rewards.len() as f64;
    Ok(DemoSet {
        buffer: PrioritizedBuffer::sealed_from(transitions, params)?,
        mean_reward,
        files,
        skipped,
        env_hash: hash.unwrap_or_default(),
    })
}
