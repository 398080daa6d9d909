//! Soft actor-critic with an imitation term: twin critics, a value network
//! with a Polyak-averaged target, a tanh-Gaussian policy and automatic
//! temperature tuning.

mod checkpoint;
pub mod losses;
pub mod selfcheck;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use losses::{policy_loss, q_filter, q_target, regression_loss, temperature_loss, value_target, LossGrad, PolicyItem};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::env::{Observation, OBS_DIM};
use crate::error::{Error, Result};
use crate::numerics::{adam_step, deterministic_action, sample_tanh_gaussian, AdamState, GaussianHeadOutput, ParameterSet, HIDDEN_UNITS};
use crate::replay::{compose_minibatch, PrioritizedBuffer, RatioState, SampleBatch, Source};

use losses::policy_input;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub gamma: f64,
    pub polyak: f64,
    pub learning_rate: f64,
    pub initial_alpha: f64,
    pub target_entropy: f64,
    /// Agent transitions collected before the first update.
    pub warmup: usize,
    /// Reuse the value-target policy sample in the policy update.
    pub shared_policy_sample: bool,
    /// Scale applied to the initial policy output layer.
    pub policy_output_scale: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            gamma: 0.995,
            polyak: 0.005,
            learning_rate: 3e-4,
            initial_alpha: 1.0,
            target_entropy: -1.0,
            warmup: 1000,
            shared_policy_sample: true,
            policy_output_scale: 1e-2,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("learner: {m}")));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.polyak) {
            return bad("polyak must lie in [0, 1]");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(self.initial_alpha > 0.0) {
            return bad("initial_alpha must be positive");
        }
        if !self.target_entropy.is_finite() {
            return bad("target_entropy must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerState {
    pub config: LearnerConfig,
    pub policy: ParameterSet,
    pub q1: ParameterSet,
    pub q2: ParameterSet,
    pub value: ParameterSet,
    pub value_target: ParameterSet,
    pub adam_policy: AdamState,
    pub adam_q1: AdamState,
    pub adam_q2: AdamState,
    pub adam_value: AdamState,
    pub adam_alpha: AdamState,
    pub log_alpha: f64,
    /// Completed `train_step` calls that ran an update.
    pub updates: u64,
}

/// Scalars from one `train_step`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossReport {
    pub warming_up: bool,
    pub q1_loss: f64,
    pub q2_loss: f64,
    pub value_loss: f64,
    pub policy_rl_loss: f64,
    pub policy_il_loss: f64,
    pub alpha_loss: f64,
    /// Share of expert samples passing the Q-filter; `None` without demos.
    pub filter_pass: Option<f64>,
    pub alpha: f64,
    pub rho: f64,
    pub agent_samples: usize,
    pub expert_samples: usize,
    /// Priorities floored at `eps` this update.
    pub floored: usize,
    /// Optimizer steps skipped for non-finite gradients.
    pub skipped: usize,
}

impl LearnerState {
    pub fn new(config: LearnerConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = HIDDEN_UNITS;
        let mut policy = ParameterSet::new(&[OBS_DIM, h, h, 2], &mut rng)?;
        policy.scale_output_layer(config.policy_output_scale);
        let q1 = ParameterSet::new(&[OBS_DIM + 1, h, h, 1], &mut rng)?;
        let q2 = ParameterSet::new(&[OBS_DIM + 1, h, h, 1], &mut rng)?;
        let value = ParameterSet::new(&[OBS_DIM, h, h, 1], &mut rng)?;
        let lr = config.learning_rate;
        Ok(Self {
            adam_policy: AdamState::new(policy.len(), lr),
            adam_q1: AdamState::new(q1.len(), lr),
            adam_q2: AdamState::new(q2.len(), lr),
            adam_value: AdamState::new(value.len(), lr),
            adam_alpha: AdamState::new(1, lr),
            log_alpha: config.initial_alpha.ln(),
            value_target: value.clone(),
            policy,
            q1,
            q2,
            value,
            config,
            updates: 0,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    /// Stochastic action for training rollouts.
    pub fn act<R: Rng + ?Sized>(&self, obs: &Observation, rng: &mut R) -> Result<f64> {
        let noise: f64 = rng.sample(StandardNormal);
        let head = GaussianHeadOutput::from_raw(&self.policy.predict(obs.as_slice())?);
        Ok(sample_tanh_gaussian(&head, &[noise]).action[0])
    }

    /// `tanh(mu(s))`, used for evaluation.
    pub fn act_deterministic(&self, obs: &Observation) -> Result<f64> {
        policy_mean_action(&self.policy, obs)
    }

    pub fn polyak_update(&mut self) -> Result<()> {
        polyak_update(&mut self.value_target, &self.value, self.config.polyak)
    }

    /// Critic values of `(s, a)`.
    pub fn q_values(&self, state: &[f64], action: f64) -> Result<(f64, f64)> {
        let x = policy_input(state, action);
        Ok((self.q1.predict(&x)?[0], self.q2.predict(&x)?[0]))
    }

    /// Q-filter outcome for one expert pair, given the policy noise used for
    /// the comparison sample.
    pub fn q_filter_pass(&self, state: &[f64], expert_action: f64, noise: f64) -> Result<bool> {
        let head = GaussianHeadOutput::from_raw(&self.policy.predict(state)?);
        let a = sample_tanh_gaussian(&head, &[noise]).action[0];
        let (e1, e2) = self.q_values(state, expert_action)?;
        let (p1, p2) = self.q_values(state, a)?;
        Ok(q_filter(e1, e2, p1, p2))
    }

    /// One update: sample, critics, value, Polyak, policy, temperature,
    /// priorities. A no-op until the agent buffer holds `warmup` items.
    pub fn train_step<R: Rng + ?Sized>(
        &mut self,
        agent: &mut PrioritizedBuffer,
        mut expert: Option<&mut PrioritizedBuffer>,
        ratio: &RatioState,
        rng: &mut R,
    ) -> Result<LossReport> {
        let mut report = LossReport {
            alpha: self.alpha(),
            rho: ratio.rho,
            ..LossReport::default()
        };
        if agent.len() < self.config.warmup.max(1) {
            report.warming_up = true;
            return Ok(report);
        }
        let composed = compose_minibatch(ratio, agent, expert.as_deref(), rng)?;
        let batch = composed.batch;
        report.agent_samples = composed.agent;
        report.expert_samples = composed.expert;
        let n = batch.len();
        let noise: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let policy_noise: Vec<f64> = if self.config.shared_policy_sample {
            noise.clone()
        } else {
            (0..n).map(|_| rng.sample(StandardNormal)).collect()
        };
        let alpha = self.alpha();
        let mut skipped = Vec::new();

        // critics
        let q_inputs: Vec<Vec<f64>> = batch.transitions.iter().map(|t| policy_input(t.state.as_slice(), t.action)).collect();
        let mut q_targets = Vec::with_capacity(n);
        for t in &batch.transitions {
            let v_next = self.value_target.predict(t.next_state.as_slice())?[0];
            q_targets.push(q_target(t.reward, self.config.gamma, t.done, v_next));
        }
        let l1 = regression_loss(&self.q1, &q_inputs, &q_targets, &batch.weights)?;
        let l2 = regression_loss(&self.q2, &q_inputs, &q_targets, &batch.weights)?;
        if !step(&mut self.q1, &l1, &mut self.adam_q1)? {
            skipped.push("q1");
        }
        if !step(&mut self.q2, &l2, &mut self.adam_q2)? {
            skipped.push("q2");
        }
        report.q1_loss = l1.loss;
        report.q2_loss = l2.loss;

        // value
        let states: Vec<Vec<f64>> = batch.transitions.iter().map(|t| t.state.as_slice().to_vec()).collect();
        let mut v_targets = Vec::with_capacity(n);
        let mut log_probs = Vec::with_capacity(n);
        let mut sampled = Vec::with_capacity(n);
        for (s, &xi) in states.iter().zip(&noise) {
            let head = GaussianHeadOutput::from_raw(&self.policy.predict(s)?);
            let smp = sample_tanh_gaussian(&head, &[xi]);
            let (q1, q2) = self.q_values(s, smp.action[0])?;
            v_targets.push(value_target(q1, q2, alpha, smp.log_prob));
            log_probs.push(smp.log_prob);
            sampled.push((smp.action[0], q1.min(q2)));
        }
        let lv = regression_loss(&self.value, &states, &v_targets, &batch.weights)?;
        if !step(&mut self.value, &lv, &mut self.adam_value)? {
            skipped.push("value");
        }
        report.value_loss = lv.loss;

        self.polyak_update()?;

        // policy
        let mut items = Vec::with_capacity(n);
        let (mut expert_seen, mut expert_pass) = (0usize, 0usize);
        for i in 0..n {
            let t = &batch.transitions[i];
            let source = batch.sources[i];
            let pass = if source == Source::Expert {
                let (e1, e2) = self.q_values(&states[i], t.action)?;
                let bar = if self.config.shared_policy_sample {
                    sampled[i].1
                } else {
                    let head = GaussianHeadOutput::from_raw(&self.policy.predict(&states[i])?);
                    let a = sample_tanh_gaussian(&head, &[policy_noise[i]]).action[0];
                    let (p1, p2) = self.q_values(&states[i], a)?;
                    p1.min(p2)
                };
                let pass = q_filter(e1, e2, bar, bar);
                expert_seen += 1;
                expert_pass += pass as usize;
                pass
            } else {
                false
            };
            items.push(PolicyItem {
                state: states[i].clone(),
                noise: policy_noise[i],
                source,
                expert_action: t.action,
                pass,
                weight: batch.weights[i],
            });
        }
        if expert_seen > 0 && expert_pass == 0 {
            log::debug!("every expert sample failed the Q-filter; imitation term is zero");
        }
        let lp = policy_loss(&self.policy, &self.q1, &self.q2, alpha, &items)?;
        let finite = lp.rl.is_finite() && lp.il.is_finite();
        if !(finite && adam_step(self.policy.values_mut(), lp.grad.values(), &mut self.adam_policy)?) {
            skipped.push("policy");
        }
        report.policy_rl_loss = lp.rl;
        report.policy_il_loss = lp.il;
        report.filter_pass = if expert_seen > 0 {
            Some(expert_pass as f64 / expert_seen as f64)
        } else {
            expert.as_deref().map(|e| self.probe_filter(e)).transpose()?
        };

        // temperature
        let (j, dj) = temperature_loss(self.log_alpha, &log_probs, self.config.target_entropy);
        let mut la = [self.log_alpha];
        if !adam_step(&mut la, &[dj], &mut self.adam_alpha)? {
            skipped.push("alpha");
        }
        self.log_alpha = la[0];
        report.alpha_loss = j;
        report.alpha = self.alpha();

        // priorities
        for i in 0..n {
            let buf = match batch.sources[i] {
                Source::Agent => &mut *agent,
                Source::Expert => expert.as_deref_mut().expect("expert sample implies an expert buffer"),
            };
            let (_, floored) = buf.update_priority(batch.indices[i], lp.per_sample[i], l1.per_sample[i], l2.per_sample[i])?;
            report.floored += floored as usize;
        }

        if !skipped.is_empty() {
            log::warn!("update {}: skipped non-finite steps {:?}", self.updates, skipped);
        }
        report.skipped = skipped.len();
        self.updates += 1;
        Ok(report)
    }

    /// Q-filter pass rate on a fixed-size expert probe, for batches that
    /// happen to contain no expert samples. Uses its own RNG stream so the
    /// training stream is unaffected.
    fn probe_filter(&self, expert: &PrioritizedBuffer) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_f11e ^ self.updates);
        let k = expert.len().min(64);
        let probe: SampleBatch = expert.sample(k, &mut rng)?;
        let mut pass = 0;
        for t in &probe.transitions {
            let xi: f64 = rng.sample(StandardNormal);
            pass += self.q_filter_pass(t.state.as_slice(), t.action, xi)? as usize;
        }
        Ok(pass as f64 / k as f64)
    }
}

fn step(net: &mut ParameterSet, loss: &LossGrad, adam: &mut AdamState) -> Result<bool> {
    if !loss.loss.is_finite() {
        return Ok(false);
    }
    adam_step(net.values_mut(), loss.grad.values(), adam)
}

/// `target <- weight * source + (1 - weight) * target`.
pub fn polyak_update(target: &mut ParameterSet, source: &ParameterSet, weight: f64) -> Result<()> {
    target.blend_toward(source, weight)
}

/// Deterministic action of any policy network.
pub fn policy_mean_action(policy: &ParameterSet, obs: &Observation) -> Result<f64> {
    let head = GaussianHeadOutput::from_raw(&policy.predict(obs.as_slice())?);
    Ok(deterministic_action(&head)[0])
}
