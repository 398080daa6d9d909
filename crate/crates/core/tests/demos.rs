use sacfd_core::demos::{bc_train, load_demo_set, record_episode, BcConfig, ScriptedController};
use sacfd_core::env::{EnvConfig, RoundaboutEnv, TerminalCause};
use sacfd_core::replay::PriorityParams;

#[test]
fn scripted_demo_set_trains_a_bc_policy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = EnvConfig::default();
    let mut env = RoundaboutEnv::new(cfg.clone()).unwrap();
    let mut ctrl = ScriptedController(Default::default());
    let mut paths = Vec::new();
    let mut successes = 0;
    for k in 0..50 {
        let traj = record_episode(&mut ctrl, &mut env, k).unwrap();
        successes += (traj.header.cause == TerminalCause::Destination) as usize;
        let p = dir.path().join(format!("episode_{k:04}.jsonl"));
        traj.save(&p).unwrap();
        paths.push(p);
    }
    assert!(successes >= 45, "expert succeeded {successes}/50");

    let set = load_demo_set(&paths, Some(&cfg.dynamics_hash()), None, PriorityParams::default()).unwrap();
    let data: Vec<_> = set.buffer.transitions().iter().map(|t| (t.state, t.action)).collect();
    let config = BcConfig {
        epochs: 5,
        ..Default::default()
    };
    let result = bc_train(&data, &config, 0).unwrap();
    let mse: Vec<f64> = result.epochs.iter().map(|e| e.heldout_mse).collect();
    assert_eq!(mse.len(), 5);
    assert!(mse.windows(2).all(|w| w[1] <= w[0]), "held-out MSE went up: {mse:?}");
}
