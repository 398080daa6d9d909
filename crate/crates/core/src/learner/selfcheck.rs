//! Finite-difference audit of every learner objective on random mini-batches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::losses::{imitation_loss, policy_input, policy_loss, regression_loss, temperature_loss, PolicyItem};
use super::{LearnerConfig, LearnerState};
use crate::env::OBS_DIM;
use crate::error::Result;
use crate::numerics::gradcheck::{check_gradient, GradCheck};
use crate::numerics::{sample_tanh_gaussian, GaussianHeadOutput, ParameterSet};
use crate::replay::Source;

pub const FD_STEP: f64 = 1e-4;

fn random_state(rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..OBS_DIM).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn check_net<F>(net: &ParameterSet, analytic: &ParameterSet, loss: F) -> GradCheck
where
    F: Fn(&ParameterSet) -> f64,
{
    let mut probe = net.clone();
    check_gradient(net.values(), analytic.values(), FD_STEP, |v| {
        probe.values_mut().copy_from_slice(v);
        loss(&probe)
    })
}

// Forward-only objective values for the finite-difference probes: a second
// transcription of each loss that never touches the backward pass.

fn regression_value(net: &ParameterSet, inputs: &[Vec<f64>], targets: &[f64], weights: &[f64]) -> f64 {
    let sum: f64 = (0..inputs.len())
        .map(|i| weights[i] * (net.predict(&inputs[i]).unwrap()[0] - targets[i]).powi(2))
        .sum();
    sum / inputs.len() as f64
}

fn policy_value(policy: &ParameterSet, q1: &ParameterSet, q2: &ParameterSet, alpha: f64, items: &[PolicyItem]) -> (f64, f64) {
    let (mut rl, mut il) = (0.0, 0.0);
    for item in items {
        let head = GaussianHeadOutput::from_raw(&policy.predict(&item.state).unwrap());
        match item.source {
            Source::Agent => {
                let s = sample_tanh_gaussian(&head, &[item.noise]);
                let x = policy_input(&item.state, s.action[0]);
                let q = q1.predict(&x).unwrap()[0].min(q2.predict(&x).unwrap()[0]);
                rl += item.weight * (alpha * s.log_prob - q);
            }
            Source::Expert if item.pass => il += item.weight * (head.mean[0].tanh() - item.expert_action).powi(2),
            Source::Expert => {}
        }
    }
    let n = items.len() as f64;
    (rl / n, il / n)
}

fn imitation_value(policy: &ParameterSet, states: &[Vec<f64>], actions: &[f64]) -> f64 {
    let sum: f64 = states
        .iter()
        .zip(actions)
        .map(|(s, a)| (policy.predict(s).unwrap()[0].tanh() - a).powi(2))
        .sum();
    sum / states.len() as f64
}

/// Runs one randomized round of checks with `batch` samples. Returns
/// `(objective, result)` pairs for the critics, value, policy, imitation and
/// temperature objectives.
pub fn gradient_round(seed: u64, batch: usize) -> Result<Vec<(&'static str, GradCheck)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut learner = LearnerState::new(LearnerConfig::default(), rng.random())?;
    // an untrained policy head is scaled near zero; give it a real signal
    learner.policy = ParameterSet::new(&[OBS_DIM, 64, 64, 2], &mut rng)?;
    let alpha: f64 = rng.random_range(0.05..2.0);

    let states: Vec<Vec<f64>> = (0..batch).map(|_| random_state(&mut rng)).collect();
    let actions: Vec<f64> = (0..batch).map(|_| rng.random_range(-0.99..0.99)).collect();
    let targets: Vec<f64> = (0..batch).map(|_| rng.random_range(-3.0..3.0)).collect();
    let weights: Vec<f64> = (0..batch).map(|_| rng.random_range(0.2..1.0)).collect();
    let q_inputs: Vec<Vec<f64>> = states.iter().zip(&actions).map(|(s, &a)| policy_input(s, a)).collect();

    let mut out = Vec::new();
    for (name, net) in [("q1 regression", &learner.q1), ("q2 regression", &learner.q2)] {
        let lg = regression_loss(net, &q_inputs, &targets, &weights)?;
        out.push((name, check_net(net, &lg.grad, |p| regression_value(p, &q_inputs, &targets, &weights))));
    }
    let lv = regression_loss(&learner.value, &states, &targets, &weights)?;
    out.push((
        "value regression",
        check_net(&learner.value, &lv.grad, |p| regression_value(p, &states, &targets, &weights)),
    ));

    let items: Vec<PolicyItem> = (0..batch)
        .map(|i| PolicyItem {
            state: states[i].clone(),
            noise: rng.sample(StandardNormal),
            source: if i % 2 == 0 { Source::Agent } else { Source::Expert },
            expert_action: actions[i],
            pass: i % 4 != 3,
            weight: weights[i],
        })
        .collect();
    let (q1, q2) = (&learner.q1, &learner.q2);
    let lp = policy_loss(&learner.policy, q1, q2, alpha, &items)?;
    out.push((
        "policy combined",
        check_net(&learner.policy, &lp.grad, |p| {
            let (rl, il) = policy_value(p, q1, q2, alpha, &items);
            rl + il
        }),
    ));
    let agent_only: Vec<PolicyItem> = items.iter().filter(|it| it.source == Source::Agent).cloned().collect();
    let la = policy_loss(&learner.policy, q1, q2, alpha, &agent_only)?;
    out.push((
        "policy soft",
        check_net(&learner.policy, &la.grad, |p| policy_value(p, q1, q2, alpha, &agent_only).0),
    ));
    let li = imitation_loss(&learner.policy, &states, &actions)?;
    out.push((
        "policy imitation",
        check_net(&learner.policy, &li.grad, |p| imitation_value(p, &states, &actions)),
    ));

    let log_probs: Vec<f64> = (0..batch).map(|_| rng.random_range(-3.0..2.0)).collect();
    let log_alpha = alpha.ln();
    let (_, d) = temperature_loss(log_alpha, &log_probs, -1.0);
    out.push((
        "temperature",
        check_gradient(&[log_alpha], &[d], FD_STEP, |v| temperature_loss(v[0], &log_probs, -1.0).0),
    ));
    Ok(out)
}
