//! Rayon against plain loops on the two data-parallel hot paths.
//!
//! `rollouts` compares both backends inside one binary. `train_step` only
//! measures the backend the crate was built with; run it once more with
//! `--no-default-features` for the sequential number.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sacfd_core::demos::{record_episode, ScriptedController};
use sacfd_core::env::{EnvConfig, RoundaboutEnv};
use sacfd_core::learner::{LearnerConfig, LearnerState};
use sacfd_core::par;
use sacfd_core::replay::{PrioritizedBuffer, PriorityParams, RatioState, Source, AGENT_CAPACITY};
use sacfd_core::run::{eval_seeds, evaluate, rollout, EvalController};

fn rollouts(c: &mut Criterion) {
    let cfg = EnvConfig::default();
    let controller = EvalController::Scripted(Default::default());
    let seeds = eval_seeds(0, 8);
    let mut group = c.benchmark_group("rollouts_8");
    group.sample_size(10);
    group.bench_function("par_map", |b| b.iter(|| black_box(evaluate(&cfg, &controller, &seeds).unwrap())));
    group.bench_function("sequential", |b| {
        b.iter(|| {
            let mut env = RoundaboutEnv::new(cfg.clone()).unwrap();
            let out: Vec<_> = seeds.iter().map(|&s| rollout(&controller, &mut env, s).unwrap()).collect();
            black_box(out)
        })
    });
    group.finish();
}

fn train_step(c: &mut Criterion) {
    let mut env = RoundaboutEnv::new(EnvConfig::default()).unwrap();
    let mut ctrl = ScriptedController(Default::default());
    let mut agent = PrioritizedBuffer::new(AGENT_CAPACITY, PriorityParams::default());
    let mut seed = 0;
    while agent.len() < 3000 {
        for step in record_episode(&mut ctrl, &mut env, seed).unwrap().steps {
            agent.push(step.to_transition(Source::Agent)).unwrap();
        }
        seed += 1;
    }
    let mut learner = LearnerState::new(LearnerConfig::default(), 0).unwrap();
    let ratio = RatioState::new(None);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let name = if par::is_parallel() { "rayon" } else { "sequential" };
    c.bench_function(&format!("train_step/{name}"), |b| {
        b.iter(|| black_box(learner.train_step(&mut agent, None, &ratio, &mut rng).unwrap()))
    });
}

criterion_group!(benches, rollouts, train_step);
criterion_main!(benches);
