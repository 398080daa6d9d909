use std::net::TcpStream;
use std::path::Path;
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use sacfd_core::demos::bridge::{serve_demo_bridge, BridgeConfig, BridgeSummary, ServerMessage};
use sacfd_core::demos::{load_demo_set, replay_actions, DemoSource, Trajectory};
use sacfd_core::env::{EnvConfig, RoundaboutEnv, TerminalCause};
use sacfd_core::replay::PriorityParams;
use tungstenite::stream::MaybeTlsStream;
use tungstenite::{connect, Message, WebSocket};

type Client = WebSocket<MaybeTlsStream<TcpStream>>;

fn start(out: &Path, autosave: bool, max_episodes: usize, seed: u64) -> (u16, thread::JoinHandle<BridgeSummary>) {
    let (tx, rx) = mpsc::channel();
    let cfg = BridgeConfig {
        out_dir: out.to_path_buf(),
        seed,
        tick: Duration::from_millis(1),
        autosave,
        max_episodes: Some(max_episodes),
    };
    let handle = thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
        rt.block_on(async move {
            let listener = sacfd_core::demos::bridge::bind(0).await.unwrap();
            tx.send(listener.local_addr().unwrap().port()).unwrap();
            let env = RoundaboutEnv::new(EnvConfig::default()).unwrap();
            serve_demo_bridge(env, listener, cfg).await.unwrap()
        })
    });
    (rx.recv().unwrap(), handle)
}

fn client(port: u16) -> Client {
    connect(format!("ws://127.0.0.1:{port}")).unwrap().0
}

fn next(ws: &mut Client) -> ServerMessage {
    loop {
        match ws.read().unwrap() {
            Message::Text(t) => return serde_json::from_str(&t).unwrap(),
            _ => continue,
        }
    }
}

fn send(ws: &mut Client, json: String) {
    ws.send(Message::text(json)).unwrap();
}

/// Reads states until `episode_end`; `on_state` sees each state's seq and
/// terminal flag. Returns the state seqs and the end message.
fn drive(ws: &mut Client, mut on_state: impl FnMut(&mut Client, u64, bool)) -> (Vec<u64>, ServerMessage) {
    let mut seqs = Vec::new();
    loop {
        let msg = next(ws);
        match &msg {
            ServerMessage::State { seq, terminal, .. } => {
                seqs.push(*seq);
                on_state(ws, *seq, *terminal);
            }
            ServerMessage::EpisodeEnd { .. } => return (seqs, msg),
        }
    }
}

fn assert_replays(traj: &Trajectory) {
    let mut env = RoundaboutEnv::new(EnvConfig::default()).unwrap();
    let actions: Vec<f64> = traj.steps.iter().map(|s| s.action).collect();
    let states = replay_actions(&mut env, traj.header.seed, &actions).unwrap();
    for (t, s) in traj.steps.iter().enumerate() {
        assert_eq!(states[t], s.state, "state {t}");
        assert_eq!(states[t + 1], s.next_state, "next_state {t}");
    }
}

#[test]
fn silent_client_gets_held_zero_action() {
    let dir = tempfile::tempdir().unwrap();
    let (port, server) = start(dir.path(), true, 1, 40);
    let mut ws = client(port);
    let (seqs, end) = drive(&mut ws, |_, _, _| {});
    let summary = server.join().unwrap();

    assert!(seqs.windows(2).all(|w| w[1] == w[0] + 1), "state seqs not consecutive");
    let ServerMessage::EpisodeEnd { steps, saved_path, .. } = end else { unreachable!() };
    assert_eq!(seqs.len(), steps, "one snapshot per step");
    assert_eq!(summary.snapshots as usize, steps);
    let traj = Trajectory::load(Path::new(&saved_path.unwrap())).unwrap();
    assert_eq!(traj.header.source, DemoSource::Human);
    assert!(traj.steps.iter().all(|s| s.action == 0.0));
    assert_replays(&traj);
}

#[test]
fn ramp_client_episode_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let (port, server) = start(dir.path(), false, 1, 41);
    let mut ws = client(port);
    let mut client_seq = 100u64;
    let (_, end) = drive(&mut ws, |ws, state_seq, terminal| {
        if terminal {
            send(ws, r#"{"type":"control","cmd":"save"}"#.into());
            return;
        }
        // keyboard ramp: pedal rises in steps of 0.05 up to full throttle
        let a = (0.05 * state_seq as f64).min(1.0);
        client_seq += 2;
        send(ws, format!(r#"{{"type":"action","seq":{client_seq},"a":{a}}}"#));
        // a late duplicate with an older seq must never be applied
        send(ws, format!(r#"{{"type":"action","seq":{},"a":-1.0}}"#, client_seq - 1));
    });
    let summary = server.join().unwrap();
    let ServerMessage::EpisodeEnd { saved_path, cause, .. } = end else { unreachable!() };
    let path = saved_path.expect("saved");
    assert_eq!(summary.saved.len(), 1);

    let traj = Trajectory::load(Path::new(&path)).unwrap();
    assert_eq!(traj.header.cause, cause);
    assert!(traj.steps.iter().all(|s| s.action >= 0.0), "stale action applied");
    assert!(traj.steps.iter().any(|s| s.action > 0.0));
    assert_replays(&traj);
    let set = load_demo_set(&[path.into()], None, None, PriorityParams::default()).unwrap();
    assert_eq!(set.buffer.len(), traj.steps.len());
    assert_eq!(set.mean_reward, traj.header.episodic_reward);
}

#[test]
fn disconnect_discards_and_next_client_starts_fresh() {
    let dir = tempfile::tempdir().unwrap();
    let (port, server) = start(dir.path(), true, 2, 50);
    {
        let mut ws = client(port);
        for _ in 0..10 {
            next(&mut ws);
        }
    }
    let mut ws = client(port);
    let (_, end) = drive(&mut ws, |_, _, _| {});
    let summary = server.join().unwrap();
    assert_eq!(summary.discarded, 1);
    assert_eq!(summary.saved.len(), 1);
    let ServerMessage::EpisodeEnd { saved_path, .. } = end else { unreachable!() };
    let traj = Trajectory::load(Path::new(&saved_path.unwrap())).unwrap();
    assert_eq!(traj.header.seed, 51);
    assert_replays(&traj);
}

#[test]
fn discard_command_ends_episode_without_file() {
    let dir = tempfile::tempdir().unwrap();
    let (port, server) = start(dir.path(), false, 1, 60);
    let mut ws = client(port);
    let (seqs, end) = drive(&mut ws, |ws, seq, _| {
        if seq == 5 {
            send(ws, r#"{"type":"control","cmd":"discard"}"#.into());
        }
    });
    let summary = server.join().unwrap();
    assert!(seqs.len() >= 5);
    let ServerMessage::EpisodeEnd { saved_path, cause, steps, .. } = end else { unreachable!() };
    assert!(saved_path.is_none());
    assert_eq!(cause, TerminalCause::None);
    assert_eq!(steps, seqs.len());
    assert_eq!(summary.discarded, 1);
    assert!(std::fs::read_dir(dir.path()).unwrap().next().is_none());
}
