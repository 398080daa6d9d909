//! Live driving bridge: runs the simulator on a fixed tick and lets one
//! WebSocket client drive the ego pedal, recording each episode.
//!
//! The env is only touched on the session loop. A receive task parses client
//! messages and writes actions into a single-slot mailbox (last writer wins,
//! stale sequence numbers dropped); control commands go over a channel.

use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio::sync::mpsc;
use tokio_tungstenite::tungstenite::Message;

use crate::env::{RoundaboutEnv, TerminalCause};
use crate::error::{Error, Result};

use super::record::finish;
use super::trajectory::{episode_path, DemoSource, Trajectory, TrajectoryStep};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoView {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficView {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoneView {
    pub d1: Option<f64>,
    pub d2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    State {
        seq: u64,
        /// Simulated seconds since the episode started.
        t: f64,
        ego: EgoView,
        traffic: Vec<TrafficView>,
        zones: ZoneView,
        reward: f64,
        episodic_reward: f64,
        terminal: bool,
        cause: TerminalCause,
    },
    EpisodeEnd {
        episodic_reward: f64,
        steps: usize,
        cause: TerminalCause,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        saved_path: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlCommand {
    Reset,
    Save,
    Discard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Action { seq: u64, a: f64 },
    Control { cmd: ControlCommand },
}

/// Latest pedal command. Messages whose sequence number is not above the last
/// accepted one are dropped.
#[derive(Debug, Default)]
pub struct ActionMailbox {
    last_seq: Option<u64>,
    action: f64,
}

impl ActionMailbox {
    /// Returns whether the message was accepted.
    pub fn offer(&mut self, seq: u64, action: f64) -> bool {
        if !action.is_finite() || action.abs() > 1.0 {
            return false;
        }
        if self.last_seq.is_some_and(|last| seq <= last) {
            return false;
        }
        self.last_seq = Some(seq);
        self.action = action;
        true
    }

    pub fn current(&self) -> f64 {
        self.action
    }

    /// Back to a released pedal; sequence numbering carries on.
    pub fn release(&mut self) {
        self.action = 0.0;
    }
}

#[derive(Debug, Clone)]
pub struct BridgeConfig {
    pub out_dir: PathBuf,
    /// Seed of the first episode; episode `k` uses `seed + k`.
    pub seed: u64,
    /// Wall-clock time per simulation step.
    pub tick: Duration,
    /// Save finished episodes without waiting for a client decision.
    pub autosave: bool,
    /// Stop after this many finalized episodes (saved or discarded).
    pub max_episodes: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BridgeSummary {
    pub saved: Vec<PathBuf>,
    pub discarded: usize,
    pub snapshots: u64,
}

enum Event {
    Control(ControlCommand),
    Closed,
}

fn snapshot(env: &RoundaboutEnv, seq: u64, reward: f64, episodic: f64, terminal: bool, cause: TerminalCause) -> ServerMessage {
    let world = env.world();
    let zones = env.zones();
    ServerMessage::State {
        seq,
        t: world.step as f64 * env.config().dt,
        ego: EgoView {
            x: world.ego.x,
            y: world.ego.y,
            heading: world.ego.heading,
            v: world.ego.speed,
        },
        traffic: world
            .traffic
            .iter()
            .enumerate()
            .filter(|(_, t)| t.active)
            .map(|(id, t)| TrafficView {
                id,
                x: t.state.x,
                y: t.state.y,
                heading: t.state.heading,
                v: t.state.speed,
            })
            .collect(),
        zones: ZoneView {
            d1: zones.distance[0],
            d2: zones.distance[1],
        },
        reward,
        episodic_reward: episodic,
        terminal,
        cause,
    }
}

fn encode(msg: &ServerMessage) -> Result<Message> {
    Ok(Message::text(serde_json::to_string(msg)?))
}

/// One in-progress or finished episode on the session loop.
struct Episode {
    seed: u64,
    steps: Vec<TrajectoryStep>,
    obs: crate::env::Observation,
    episodic: f64,
    /// Set once the env reported a terminal step.
    cause: Option<TerminalCause>,
}

impl Episode {
    fn start(env: &mut RoundaboutEnv, seed: u64) -> Self {
        Self {
            seed,
            obs: env.reset(seed),
            steps: Vec::new(),
            episodic: 0.0,
            cause: None,
        }
    }
}

/// Serves clients one at a time until `max_episodes` episodes have been
/// finalized. A client that disconnects mid-episode loses that episode.
pub async fn serve_demo_bridge(mut env: RoundaboutEnv, listener: TcpListener, config: BridgeConfig) -> Result<BridgeSummary> {
    std::fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))?;
    let mut summary = BridgeSummary::default();
    let mut finalized = 0usize;
    let mut state_seq = 0u64;
    let done = |n: usize| config.max_episodes.is_some_and(|m| n >= m);

    while !done(finalized) {
        let (tcp, peer) = listener
            .accept()
            .await
            .map_err(|e| Error::Bridge(format!("accept: {e}")))?;
        let ws = match tokio_tungstenite::accept_async(tcp).await {
            Ok(ws) => ws,
            Err(e) => {
                log::warn!("handshake with {peer} failed: {e}");
                continue;
            }
        };
        log::info!("client {peer} connected");
        let (mut sink, mut stream) = ws.split();
        let mailbox = Arc::new(Mutex::new(ActionMailbox::default()));
        let (tx, mut events) = mpsc::unbounded_channel();
        let rx_mailbox = Arc::clone(&mailbox);
        let receiver = tokio::spawn(async move {
            while let Some(msg) = stream.next().await {
                let text = match msg {
                    Ok(Message::Text(t)) => t,
                    Ok(Message::Close(_)) | Err(_) => break,
                    Ok(_) => continue,
                };
                match serde_json::from_str::<ClientMessage>(&text) {
                    Ok(ClientMessage::Action { seq, a }) => {
                        if !rx_mailbox.lock().expect("mailbox poisoned").offer(seq, a) {
                            log::debug!("dropped action seq {seq} a {a}");
                        }
                    }
                    Ok(ClientMessage::Control { cmd }) => {
                        if tx.send(Event::Control(cmd)).is_err() {
                            break;
                        }
                    }
                    Err(e) => log::warn!("ignoring malformed client message: {e}"),
                }
            }
            let _ = tx.send(Event::Closed);
        });

        let mut episode = Episode::start(&mut env, config.seed + finalized as u64);
        let mut ticker = tokio::time::interval(config.tick);
        ticker.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
        let mut connected = true;
        while connected && !done(finalized) {
            let mut decision = None;
            tokio::select! {
                ev = events.recv() => match ev {
                    Some(Event::Control(cmd)) => decision = Some(cmd),
                    Some(Event::Closed) | None => connected = false,
                },
                _ = ticker.tick(), if episode.cause.is_none() => {
                    let action = mailbox.lock().expect("mailbox poisoned").current();
                    let out = env.step(action)?;
                    episode.steps.push(TrajectoryStep {
                        state: episode.obs,
                        action: out.applied_action,
                        reward: out.reward,
                        next_state: out.observation,
                        done: out.terminal && out.cause != TerminalCause::Timeout,
                    });
                    episode.obs = out.observation;
                    episode.episodic += out.reward;
                    state_seq += 1;
                    let msg = snapshot(&env, state_seq, out.reward, episode.episodic, out.terminal, out.cause);
                    if sink.send(encode(&msg)?).await.is_err() {
                        connected = false;
                        continue;
                    }
                    summary.snapshots += 1;
                    if out.terminal {
                        episode.cause = Some(out.cause);
                        if config.autosave {
                            decision = Some(ControlCommand::Save);
                        }
                    }
                }
            }
            let Some(cmd) = decision else { continue };
            // saving is only meaningful once the episode has ended
            let save = cmd == ControlCommand::Save && episode.cause.is_some();
            if cmd == ControlCommand::Save && !save {
                log::warn!("save requested before the episode ended; ignored");
                continue;
            }
            let cause = episode.cause.unwrap_or(TerminalCause::None);
            let steps = episode.steps.len();
            let mut saved_path = None;
            if save {
                let traj: Trajectory = finish(&env, episode.seed, DemoSource::Human, std::mem::take(&mut episode.steps), cause);
                let path = episode_path(&config.out_dir, summary.saved.len());
                traj.save(&path)?;
                saved_path = Some(path.display().to_string());
                summary.saved.push(path);
            } else {
                summary.discarded += 1;
            }
            let end = ServerMessage::EpisodeEnd {
                episodic_reward: episode.episodic,
                steps,
                cause,
                saved_path,
            };
            finalized += 1;
            if sink.send(encode(&end)?).await.is_err() {
                connected = false;
            }
            mailbox.lock().expect("mailbox poisoned").release();
            episode = Episode::start(&mut env, config.seed + finalized as u64);
        }
        if !episode.steps.is_empty() {
            log::info!("client {peer} left before the episode was finalized; discarding {} steps", episode.steps.len());
            summary.discarded += 1;
            finalized += 1;
        }
        receiver.abort();
        let _ = sink.close().await;
    }
    Ok(summary)
}

/// Binds `port` on localhost (0 picks a free one).
pub async fn bind(port: u16) -> Result<TcpListener> {
    TcpListener::bind(("127.0.0.1", port))
        .await
        .map_err(|e| Error::Bridge(format!("bind port {port}: {e}")))
}

/// Runs the bridge on a private single-threaded runtime. `on_bound` receives
/// the actual port before the first client is accepted.
pub fn serve_blocking(env: RoundaboutEnv, port: u16, config: BridgeConfig, on_bound: impl FnOnce(u16)) -> Result<BridgeSummary> {
    let rt = tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::Bridge(format!("runtime: {e}")))?;
    rt.block_on(async move {
        let listener = bind(port).await?;
        let addr = listener.local_addr().map_err(|e| Error::Bridge(format!("local address: {e}")))?;
        on_bound(addr.port());
        serve_demo_bridge(env, listener, config).await
    })
}
