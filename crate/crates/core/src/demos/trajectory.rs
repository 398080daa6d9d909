//! JSON-lines episode files: a header line, then one transition per line.
//! Floats are written with 17 significant digits so every value parses back
//! to the same bits.

use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::ser::Serialize;
use serde::Deserialize;
use serde_json::ser::{Formatter, Serializer};

use crate::env::{Observation, TerminalCause};
use crate::error::{Error, Result};
use crate::replay::{Source, Transition};

pub const FORMAT_VERSION: u32 = 1;
/// Layout version of [`Observation`]; bump when its entries change.
pub const OBSERVATION_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemoSource {
    Scripted,
    Human,
    Policy,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryHeader {
    pub format_version: u32,
    pub observation_version: u32,
    pub env_hash: String,
    pub dt: f64,
    pub seed: u64,
    pub source: DemoSource,
    pub episodic_reward: f64,
    pub steps: usize,
    pub cause: TerminalCause,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryStep {
    pub state: Observation,
    pub action: f64,
    pub reward: f64,
    pub next_state: Observation,
    pub done: bool,
}

impl TrajectoryStep {
    pub fn to_transition(&self, source: Source) -> Transition {
        Transition {
            state: self.state,
            action: self.action,
            reward: self.reward,
            next_state: self.next_state,
            done: self.done,
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub header: TrajectoryHeader,
    pub steps: Vec<TrajectoryStep>,
}

/// Writes floats as `d.dddddddddddddddde±x` (17 significant digits).
struct FullPrecision;

impl Formatter for FullPrecision {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }
}

fn to_line<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = Serializer::with_formatter(&mut out, FullPrecision);
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(out)
}

/// Sum of step rewards in file order.
pub fn reward_sum(steps: &[TrajectoryStep]) -> f64 {
    steps.iter().fold(0.0, |acc, s| acc + s.reward)
}

impl Trajectory {
    /// Chaining and bookkeeping checks; the error names the first problem.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let h = &self.header;
        if h.format_version != FORMAT_VERSION {
            return Err(format!("format version {} (expected {FORMAT_VERSION})", h.format_version));
        }
        if h.observation_version != OBSERVATION_VERSION {
            return Err(format!("observation version {} (expected {OBSERVATION_VERSION})", h.observation_version));
        }
        if self.steps.is_empty() {
            return Err("no transitions".into());
        }
        if h.steps != self.steps.len() {
            return Err(format!("header says {} steps, file has {}", h.steps, self.steps.len()));
        }
        for (t, pair) in self.steps.windows(2).enumerate() {
            if pair[0].next_state != pair[1].state {
                return Err(format!("transition {t}: next_state does not match the following state"));
            }
            if pair[0].done {
                return Err(format!("transition {t}: done before the last step"));
            }
        }
        for (t, s) in self.steps.iter().enumerate() {
            if !(s.action.is_finite() && s.action.abs() <= 1.0) {
                return Err(format!("transition {t}: action {} outside [-1, 1]", s.action));
            }
        }
        let sum = reward_sum(&self.steps);
        if sum.to_bits() != h.episodic_reward.to_bits() {
            return Err(format!("episodic reward {} differs from the step sum {sum}", h.episodic_reward));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = to_line(&self.header)?;
        for s in &self.steps {
            out.extend(to_line(s)?);
        }
        Ok(out)
    }

    pub fn from_reader<R: BufRead>(reader: R, origin: &Path) -> Result<Self> {
        let bad = |reason: String| Error::Trajectory {
            path: origin.to_path_buf(),
            reason,
        };
        let mut lines = reader.lines();
        let first = lines
            .next()
            .ok_or_else(|| bad("empty file".into()))?
            .map_err(|e| Error::io(origin, e))?;
        let header: TrajectoryHeader = serde_json::from_str(&first).map_err(|e| bad(format!("header: {e}")))?;
        let mut steps = Vec::with_capacity(header.steps);
        for (k, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(origin, e))?;
            if line.trim().is_empty() {
                continue;
            }
            steps.push(serde_json::from_str(&line).map_err(|e| bad(format!("line {}: {e}", k + 2)))?);
        }
        let traj = Trajectory { header, steps };
        traj.validate().map_err(bad)?;
        Ok(traj)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(BufReader::new(f), path)
    }

    /// Writes the file; on failure the partial file is removed.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let result = fs::File::create(path).and_then(|mut f| {
            f.write_all(&bytes)?;
            f.sync_all()
        });
        result.map_err(|e| {
            let _ = fs::remove_file(path);
            Error::io(path, e)
        })
    }
}

/// File name for episode `index` inside a demo directory.
pub fn episode_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("episode_{index:04}.jsonl"))
}
