use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::demos::{BcConfig, ScriptedExpertConfig};
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::learner::LearnerConfig;

/// Loop-level settings that are not part of the environment or learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub total_steps: u64,
    /// Train with the expert buffer; `false` is the plain SAC ablation.
    pub demos: bool,
    /// Skip demonstration episodes whose return is below this.
    pub min_demo_reward: Option<f64>,
    /// Environment steps between periodic evaluations; 0 disables them.
    pub eval_interval: u64,
    pub eval_episodes: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            total_steps: 100_000,
            demos: true,
            min_demo_reward: None,
            eval_interval: 5_000,
            eval_episodes: 50,
        }
    }
}

/// Everything a run reads, materialized in one TOML document with sections
/// `[env]`, `[learner]`, `[expert]`, `[bc]` and `[train]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub learner: LearnerConfig,
    pub expert: ScriptedExpertConfig,
    pub bc: BcConfig,
    pub train: TrainSettings,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(format!("run config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.learner.validate()?;
        self.expert.validate().map_err(|e| Error::Config(format!("expert: {e}")))?;
        if self.train.eval_interval > 0 && self.train.eval_episodes == 0 {
            return Err(Error::Config("train: eval_episodes must be positive when eval_interval is set".into()));
        }
        if self.bc.batch_size == 0 || !(0.0..1.0).contains(&self.bc.holdout_fraction) {
            return Err(Error::Config("bc: batch_size must be positive and holdout_fraction in [0, 1)".into()));
        }
        Ok(())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run config is always serializable")
    }

    /// SHA-256 of the materialized TOML.
    pub fn hash(&self) -> String {
        hex_digest(self.to_toml_string().as_bytes())
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
