use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::LearnerState;
use crate::error::{Error, Result};
use crate::replay::RatioState;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to resume or evaluate a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    /// Dynamics hash of the environment the policy was trained on.
    pub env_hash: String,
    pub learner: LearnerState,
    pub ratio: RatioState,
    pub env_steps: u64,
    pub episodes: u64,
    /// Return of the episode that produced this snapshot.
    pub episode_return: f64,
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!(
                "checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
                ck.version
            )));
        }
        for net in [&ck.learner.policy, &ck.learner.q1, &ck.learner.q2, &ck.learner.value, &ck.learner.value_target] {
            net.validate()?;
        }
        Ok(ck)
    }

    /// Writes via a temporary file and rename so readers never see a partial
    /// checkpoint.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("json.tmp");
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(self.to_json()?.as_bytes()).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
