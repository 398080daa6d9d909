//! Loss values and parameter gradients for the critic, value, policy and
//! temperature objectives. Every function here is pure: the caller supplies
//! targets, noise and masks, so the same inputs can be replayed by a
//! finite-difference check.

use crate::error::Result;
use crate::numerics::{
    mean_action_head_gradient, sample_tanh_gaussian, GaussianHeadOutput, ParameterSet,
};
use crate::par;
use crate::replay::Source;

/// Per-sample work is split into fixed chunks whose gradients are summed in
/// chunk order, so the result is identical with or without threads.
const CHUNK: usize = 16;

#[derive(Debug, Clone)]
pub struct LossGrad {
    /// IS-weighted batch mean.
    pub loss: f64,
    pub grad: ParameterSet,
    /// Unweighted per-sample loss terms.
    pub per_sample: Vec<f64>,
}

fn accumulate<F>(net: &ParameterSet, n: usize, f: F) -> Result<(ParameterSet, Vec<f64>)>
where
    F: Fn(usize, &mut ParameterSet) -> Result<f64> + Sync + Send,
{
    let chunks: Vec<(usize, usize)> = (0..n).step_by(CHUNK).map(|s| (s, (s + CHUNK).min(n))).collect();
    let parts = par::map(&chunks, |&(start, end)| -> Result<(ParameterSet, Vec<f64>)> {
        let mut grad = net.zeros_like();
        let mut vals = Vec::with_capacity(end - start);
        for i in start..end {
            vals.push(f(i, &mut grad)?);
        }
        Ok((grad, vals))
    });
    let mut grad = net.zeros_like();
    let mut per_sample = Vec::with_capacity(n);
    for part in parts {
        let (g, v) = part?;
        grad.add_scaled(&g, 1.0);
        per_sample.extend(v);
    }
    Ok((grad, per_sample))
}

/// Critic target `r + gamma (1 - done) V_target(s')`.
pub fn q_target(reward: f64, gamma: f64, done: bool, next_value: f64) -> f64 {
    if done {
        reward
    } else {
        reward + gamma * next_value
    }
}

/// Value target `min(Q1, Q2)(s, a~) - alpha log pi(a~|s)`.
pub fn value_target(q1: f64, q2: f64, alpha: f64, log_prob: f64) -> f64 {
    q1.min(q2) - alpha * log_prob
}

/// Imitation gate: passes when either critic rates the expert action at
/// least as high as the smaller critic rates the policy's own sample.
pub fn q_filter(q1_expert: f64, q2_expert: f64, q1_policy: f64, q2_policy: f64) -> bool {
    let bar = q1_policy.min(q2_policy);
    q1_expert >= bar || q2_expert >= bar
}

/// `mean_i w_i (f(x_i) - y_i)^2` for a scalar-output network.
pub fn regression_loss(net: &ParameterSet, inputs: &[Vec<f64>], targets: &[f64], weights: &[f64]) -> Result<LossGrad> {
    let n = inputs.len();
    assert!(targets.len() == n && weights.len() == n, "regression batch length mismatch");
    let scale = 1.0 / n as f64;
    let (grad, per_sample) = accumulate(net, n, |i, grad| {
        let (out, cache) = net.forward(&inputs[i])?;
        let err = out[0] - targets[i];
        net.backward_into(&cache, &[2.0 * scale * weights[i] * err], grad)?;
        Ok(err * err)
    })?;
    let loss = per_sample.iter().zip(weights).map(|(l, w)| w * l).sum::<f64>() * scale;
    Ok(LossGrad { loss, grad, per_sample })
}

/// One sample fed to the policy objective.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyItem {
    pub state: Vec<f64>,
    pub noise: f64,
    pub source: Source,
    /// Demonstrated action; ignored for agent samples.
    pub expert_action: f64,
    /// Q-filter outcome; ignored for agent samples.
    pub pass: bool,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct PolicyLoss {
    /// Weighted contribution of agent samples to the batch mean.
    pub rl: f64,
    /// Weighted contribution of expert samples to the batch mean.
    pub il: f64,
    pub grad: ParameterSet,
    /// `alpha log pi - min Q` for agent samples, `pass (tanh mu - a_E)^2` for
    /// expert samples.
    pub per_sample: Vec<f64>,
}

pub(crate) fn policy_input(state: &[f64], action: f64) -> Vec<f64> {
    let mut x = Vec::with_capacity(state.len() + 1);
    x.extend_from_slice(state);
    x.push(action);
    x
}

/// Combined objective: soft policy loss on agent samples, Q-filtered squared
/// imitation error on expert samples, IS-weighted and averaged over the batch.
pub fn policy_loss(
    policy: &ParameterSet,
    q1: &ParameterSet,
    q2: &ParameterSet,
    alpha: f64,
    items: &[PolicyItem],
) -> Result<PolicyLoss> {
    let n = items.len();
    let scale = 1.0 / n as f64;
    let (grad, per_sample) = accumulate(policy, n, |i, grad| {
        let item = &items[i];
        let (raw, cache) = policy.forward(&item.state)?;
        let head = GaussianHeadOutput::from_raw(&raw);
        let w = scale * item.weight;
        match item.source {
            Source::Agent => {
                let sample = sample_tanh_gaussian(&head, &[item.noise]);
                let x = policy_input(&item.state, sample.action[0]);
                let (o1, c1) = q1.forward(&x)?;
                let (o2, c2) = q2.forward(&x)?;
                let (qmin, dq) = if o1[0] <= o2[0] {
                    (o1[0], q1.input_gradient(&c1, &[1.0])?)
                } else {
                    (o2[0], q2.input_gradient(&c2, &[1.0])?)
                };
                let d_action = -w * dq[x.len() - 1];
                let up = sample.head_gradient(&[d_action], w * alpha);
                policy.backward_into(&cache, &up, grad)?;
                Ok(alpha * sample.log_prob - qmin)
            }
            Source::Expert => {
                if !item.pass {
                    return Ok(0.0);
                }
                let err = head.mean[0].tanh() - item.expert_action;
                let up = mean_action_head_gradient(&head, &[2.0 * w * err]);
                policy.backward_into(&cache, &up, grad)?;
                Ok(err * err)
            }
        }
    })?;
    let (mut rl, mut il) = (0.0, 0.0);
    for (item, l) in items.iter().zip(&per_sample) {
        match item.source {
            Source::Agent => rl += item.weight * l,
            Source::Expert => il += item.weight * l,
        }
    }
    Ok(PolicyLoss {
        rl: rl * scale,
        il: il * scale,
        grad,
        per_sample,
    })
}

/// `J = -alpha mean(log pi + target_entropy)` and its derivative in `log alpha`
/// (which equals `J` itself).
pub fn temperature_loss(log_alpha: f64, log_probs: &[f64], target_entropy: f64) -> (f64, f64) {
    let mean = log_probs.iter().map(|lp| lp + target_entropy).sum::<f64>() / log_probs.len() as f64;
    let j = -log_alpha.exp() * mean;
    (j, j)
}

/// Mean squared error of the deterministic action against demonstrated
/// actions, used by behaviour cloning.
pub fn imitation_loss(policy: &ParameterSet, states: &[Vec<f64>], actions: &[f64]) -> Result<LossGrad> {
    let n = states.len();
    let scale = 1.0 / n as f64;
    let (grad, per_sample) = accumulate(policy, n, |i, grad| {
        let (raw, cache) = policy.forward(&states[i])?;
        let head = GaussianHeadOutput::from_raw(&raw);
        let err = head.mean[0].tanh() - actions[i];
        let up = mean_action_head_gradient(&head, &[2.0 * scale * err]);
        policy.backward_into(&cache, &up, grad)?;
        Ok(err * err)
    })?;
    let loss = per_sample.iter().sum::<f64>() * scale;
    Ok(LossGrad { loss, grad, per_sample })
}
