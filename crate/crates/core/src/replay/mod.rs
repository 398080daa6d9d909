//! Prioritized replay for the agent and expert buffers, plus the adaptive
//! agent/expert mixing ratio.

mod sum_tree;

pub use sum_tree::SumTree;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::Observation;
use crate::error::{Error, Result};

pub const AGENT_CAPACITY: usize = 50_000;
pub const BATCH_SIZE: usize = 64;
pub const PRIORITY_EXPONENT: f64 = 0.6;
pub const IS_EXPONENT: f64 = 0.4;
pub const PRIORITY_EPS: f64 = 1e-6;
pub const INITIAL_RATIO: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Agent,
    Expert,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Observation,
    pub action: f64,
    pub reward: f64,
    pub next_state: Observation,
    /// True only for terminals that stop bootstrapping; timeouts stay false.
    pub done: bool,
    pub source: Source,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorityParams {
    pub omega: f64,
    pub beta: f64,
    pub eps: f64,
}

impl Default for PriorityParams {
    fn default() -> Self {
        Self {
            omega: PRIORITY_EXPONENT,
            beta: IS_EXPONENT,
            eps: PRIORITY_EPS,
        }
    }
}

/// Per-sample priority: policy loss term plus the mean of the two critic
/// losses plus `eps`. Negative or non-finite results are floored at `eps`;
/// the flag reports when that happened.
pub fn priority_from_losses(policy_loss: f64, q1_loss: f64, q2_loss: f64, eps: f64) -> (f64, bool) {
    let p = policy_loss + 0.5 * (q1_loss + q2_loss) + eps;
    if p.is_finite() && p >= eps {
        (p, false)
    } else {
        (eps, true)
    }
}

#[derive(Debug, Clone)]
pub struct PrioritizedBuffer {
    items: Vec<Transition>,
    priorities: Vec<f64>,
    tree: SumTree,
    next: usize,
    sealed: bool,
    params: PriorityParams,
}

/// Draw from one buffer, or the concatenation of an agent and an expert draw.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleBatch {
    pub transitions: Vec<Transition>,
    pub indices: Vec<usize>,
    /// Importance weights, max-normalized within each buffer's draw.
    pub weights: Vec<f64>,
    pub sources: Vec<Source>,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn count(&self, source: Source) -> usize {
        self.sources.iter().filter(|&&s| s == source).count()
    }

    fn extend(&mut self, other: SampleBatch) {
        self.transitions.extend(other.transitions);
        self.indices.extend(other.indices);
        self.weights.extend(other.weights);
        self.sources.extend(other.sources);
    }
}

impl PrioritizedBuffer {
    pub fn new(capacity: usize, params: PriorityParams) -> Self {
        assert!(capacity > 0, "buffer capacity must be positive");
        Self {
            items: Vec::with_capacity(capacity.min(1 << 16)),
            priorities: Vec::with_capacity(capacity.min(1 << 16)),
            tree: SumTree::new(capacity),
            next: 0,
            sealed: false,
            params,
        }
    }

    /// A fixed-size expert buffer holding exactly `transitions`.
    pub fn sealed_from(transitions: Vec<Transition>, params: PriorityParams) -> Result<Self> {
        if transitions.is_empty() {
            return Err(Error::Contract("expert buffer needs at least one transition".into()));
        }
        let mut buf = Self::new(transitions.len(), params);
        for t in transitions {
            buf.push(t)?;
        }
        buf.sealed = true;
        Ok(buf)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.tree.capacity()
    }

    pub fn is_sealed(&self) -> bool {
        self.sealed
    }

    pub fn params(&self) -> PriorityParams {
        self.params
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.items
    }

    pub fn priority(&self, index: usize) -> f64 {
        self.priorities[index]
    }

    /// Largest stored priority, 1.0 for an empty buffer.
    pub fn max_priority(&self) -> f64 {
        if self.is_empty() {
            1.0
        } else {
            self.priorities.iter().copied().fold(0.0, f64::max)
        }
    }

    pub fn tree(&self) -> &SumTree {
        &self.tree
    }

    /// Store at the current max priority, overwriting the oldest item when full.
    /// Errors only on a sealed buffer.
    pub fn push(&mut self, transition: Transition) -> Result<usize> {
        if self.sealed {
            return Err(Error::Contract("expert buffer is immutable after loading".into()));
        }
        let (p, leaf) = if self.items.is_empty() {
            (1.0, 1.0)
        } else {
            let leaf = self.tree.max_leaf();
            (leaf.powf(1.0 / self.params.omega), leaf)
        };
        let index = self.next;
        if index == self.items.len() {
            self.items.push(transition);
            self.priorities.push(p);
        } else {
            self.items[index] = transition;
            self.priorities[index] = p;
        }
        self.tree.set(index, leaf);
        self.next = (index + 1) % self.capacity();
        Ok(index)
    }

    /// Stratified proportional draw of `k` items with max-normalized
    /// importance weights `(1 / (N P(i)))^beta`.
    pub fn sample<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Result<SampleBatch> {
        if self.is_empty() {
            return Err(Error::Contract("cannot sample from an empty buffer".into()));
        }
        if k > self.len() {
            return Err(Error::Contract(format!("requested {k} samples from a buffer of {}", self.len())));
        }
        let total = self.tree.total();
        let n = self.len() as f64;
        let segment = total / k as f64;
        let mut batch = SampleBatch {
            transitions: Vec::with_capacity(k),
            indices: Vec::with_capacity(k),
            weights: Vec::with_capacity(k),
            sources: Vec::with_capacity(k),
        };
        for j in 0..k {
            let u: f64 = rng.random();
            let index = self.tree.find(segment * (j as f64 + u));
            let prob = self.tree.get(index) / total;
            batch.weights.push((n * prob).powf(-self.params.beta));
            batch.indices.push(index);
            batch.transitions.push(self.items[index]);
            batch.sources.push(self.items[index].source);
        }
        let wmax = batch.weights.iter().copied().fold(0.0, f64::max);
        for w in &mut batch.weights {
            *w /= wmax;
        }
        Ok(batch)
    }

    /// Overwrite one item's priority from its loss terms. Returns the stored
    /// priority and whether it had to be floored.
    pub fn update_priority(&mut self, index: usize, policy_loss: f64, q1_loss: f64, q2_loss: f64) -> Result<(f64, bool)> {
        let (p, floored) = priority_from_losses(policy_loss, q1_loss, q2_loss, self.params.eps);
        self.set_priority(index, p)?;
        Ok((p, floored))
    }

    pub fn set_priority(&mut self, index: usize, priority: f64) -> Result<()> {
        if index >= self.len() {
            return Err(Error::Contract(format!("priority index {index} out of range {}", self.len())));
        }
        let p = if priority.is_finite() { priority.max(self.params.eps) } else { self.params.eps };
        self.priorities[index] = p;
        self.tree.set(index, p.powf(self.params.omega));
        Ok(())
    }
}

/// Agent/expert mixing ratio and its per-episode update rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioState {
    pub rho: f64,
    pub batch_size: usize,
    /// Mean episodic reward of the demonstrations; `None` when training
    /// without demonstrations.
    pub expert_mean_reward: Option<f64>,
}

impl RatioState {
    pub fn new(expert_mean_reward: Option<f64>) -> Self {
        Self {
            rho: if expert_mean_reward.is_some() { INITIAL_RATIO } else { 1.0 },
            batch_size: BATCH_SIZE,
            expert_mean_reward,
        }
    }

    /// Agent share of the batch, rounded half-to-even.
    pub fn agent_count(&self) -> usize {
        ((self.rho * self.batch_size as f64).round_ties_even() as usize).min(self.batch_size)
    }
}

/// Raise `rho` by `1 / batch_size` when the finished episode's return reaches
/// the expert mean. Returns whether it moved.
pub fn update_ratio(ratio: &mut RatioState, episode_reward: f64) -> bool {
    let Some(expert) = ratio.expert_mean_reward else {
        return false;
    };
    let before = ratio.rho;
    if episode_reward >= expert {
        ratio.rho = (ratio.rho + 1.0 / ratio.batch_size as f64).clamp(0.0, 1.0);
    }
    ratio.rho != before
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComposedBatch {
    pub batch: SampleBatch,
    pub agent: usize,
    pub expert: usize,
    /// Slots moved from one side to the other because a buffer was too small.
    pub shortfall: usize,
}

/// Mini-batch of `ratio.batch_size` with the agent share taken from `agent`
/// and the remainder from `expert`. Agent items come first.
pub fn compose_minibatch<R: Rng + ?Sized>(
    ratio: &RatioState,
    agent: &PrioritizedBuffer,
    expert: Option<&PrioritizedBuffer>,
    rng: &mut R,
) -> Result<ComposedBatch> {
    let n = ratio.batch_size;
    let agent_len = agent.len();
    let expert_len = expert.map_or(0, |e| e.len());
    if agent_len + expert_len < n {
        return Err(Error::Contract(format!(
            "need {n} transitions, have {agent_len} agent + {expert_len} expert"
        )));
    }
    let want = ratio.agent_count();
    let mut take_agent = want.min(agent_len);
    let mut take_expert = n - take_agent;
    if take_expert > expert_len {
        take_expert = expert_len;
        take_agent = n - take_expert;
    }
    let shortfall = want.abs_diff(take_agent);
    if shortfall > 0 {
        log::debug!("minibatch shortfall: wanted {want} agent samples, took {take_agent}");
    }
    let mut batch = SampleBatch::default();
    if take_agent > 0 {
        batch.extend(agent.sample(take_agent, rng)?);
    }
    if take_expert > 0 {
        batch.extend(expert.expect("expert side is non-empty").sample(take_expert, rng)?);
    }
    Ok(ComposedBatch {
        batch,
        agent: take_agent,
        expert: take_expert,
        shortfall,
    })
}
