//! Behaviour cloning: regress `tanh(mu(s))` onto demonstrated actions.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::Observation;
use crate::error::{Error, Result};
use crate::learner::losses::imitation_loss;
use crate::learner::{LearnerConfig, LearnerState};
use crate::numerics::{adam_step, AdamState, ParameterSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BcConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Share of samples kept out of training to measure generalization.
    pub holdout_fraction: f64,
}

impl Default for BcConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 64,
            learning_rate: 1e-3,
            holdout_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BcEpoch {
    pub epoch: usize,
    /// Mean of the mini-batch losses seen during the epoch.
    pub train_loss: f64,
    pub heldout_mse: f64,
}

#[derive(Debug, Clone)]
pub struct BcResult {
    pub policy: ParameterSet,
    pub epochs: Vec<BcEpoch>,
}

fn mse(policy: &ParameterSet, states: &[Vec<f64>], actions: &[f64]) -> Result<f64> {
    if states.is_empty() {
        return Ok(f64::NAN);
    }
    Ok(imitation_loss(policy, states, actions)?.loss)
}

/// Trains a fresh policy (same architecture and initialization as the
/// learner's) on `(state, action)` pairs.
pub fn bc_train(data: &[(Observation, f64)], config: &BcConfig, seed: u64) -> Result<BcResult> {
    if data.is_empty() {
        return Err(Error::Contract("behaviour cloning needs at least one sample".into()));
    }
    if config.batch_size == 0 || !(0.0..1.0).contains(&config.holdout_fraction) {
        return Err(Error::Config("bc: batch_size must be positive and holdout_fraction in [0, 1)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng);
    let n_hold = ((data.len() as f64) * config.holdout_fraction).floor() as usize;
    let n_hold = n_hold.min(data.len() - 1);
    let split = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<f64>) {
        idx.iter().map(|&i| (data[i].0.as_slice().to_vec(), data[i].1)).unzip()
    };
    let (hold_s, hold_a) = split(&order[..n_hold]);
    let (train_s, train_a) = split(&order[n_hold..]);

    let mut policy = LearnerState::new(LearnerConfig::default(), seed)?.policy;
    let mut adam = AdamState::new(policy.len(), config.learning_rate);
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut idx: Vec<usize> = (0..train_s.len()).collect();
    for epoch in 1..=config.epochs {
        idx.shuffle(&mut rng);
        let (mut total, mut batches) = (0.0, 0usize);
        for chunk in idx.chunks(config.batch_size) {
            let s: Vec<Vec<f64>> = chunk.iter().map(|&i| train_s[i].clone()).collect();
            let a: Vec<f64> = chunk.iter().map(|&i| train_a[i]).collect();
            let lg = imitation_loss(&policy, &s, &a)?;
            adam_step(policy.values_mut(), lg.grad.values(), &mut adam)?;
            total += lg.loss;
            batches += 1;
        }
        epochs.push(BcEpoch {
            epoch,
            train_loss: total / batches as f64,
            heldout_mse: mse(&policy, &hold_s, &hold_a)?,
        });
    }
    Ok(BcResult { policy, epochs })
}
