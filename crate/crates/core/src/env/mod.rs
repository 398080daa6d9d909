//! Deterministic fixed-step roundabout simulator.
//!
//! The ego vehicle's longitudinal action comes from the caller; steering is
//! pure pursuit along a fixed route from entry arm `ego_entry` to exit arm
//! `ego_exit`. Surrounding traffic runs on rails along random routes.

mod config;
pub mod geometry;
pub mod reward;
pub mod steering;
pub mod traffic;
pub mod vehicle;
pub mod zones;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use config::{EnvConfig, ShieldConfig};
pub use geometry::{Roundabout, RouteGeometry, RouteId};
pub use reward::{reward, RewardComponents, RewardParams};
pub use traffic::{entry_yield_accel, traffic_policy, TrafficParams, TrafficVehicle};
pub use vehicle::{OrientedBox, VehicleState};
pub use zones::{detect_zones, DetectionZoneSpec, ZoneHits};

use crate::error::{Error, Result};

pub const OBS_DIM: usize = 7;

/// Curvature that maps to +-1 in the observation, 1/m.
const CURVATURE_SCALE: f64 = 0.125;

/// Fixed-length feature vector seen by the policy; every entry in [-1, 1].
///
/// Layout: ego speed / v_max, zone-1 closeness, zone-2 closeness, nearest
/// leader relative speed / v_max, route progress fraction, route curvature at
/// the lookahead point, previous action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Observation(pub [f64; OBS_DIM]);

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TerminalCause {
    None,
    Destination,
    Collision,
    Timeout,
}

impl TerminalCause {
    pub fn is_terminal(self) -> bool {
        self != TerminalCause::None
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TerminalCause::None => "none",
            TerminalCause::Destination => "destination",
            TerminalCause::Collision => "collision",
            TerminalCause::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub components: RewardComponents,
    /// Action actually executed (after the safety shield, if enabled).
    pub applied_action: f64,
    pub terminal: bool,
    pub cause: TerminalCause,
}

/// Everything that changes while an episode runs.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub ego: VehicleState,
    /// Arc length of the ego rear axle's projection, for pure pursuit.
    pub ego_rear_progress: f64,
    pub traffic: Vec<TrafficVehicle>,
    pub step: u32,
    pub rng: ChaCha8Rng,
    /// Arc-length window on the ego route that ends the episode successfully.
    pub destination: (f64, f64),
    pub prev_action: f64,
    pub cause: TerminalCause,
}

/// Shielded action: full brake when something is close in zone 2 and the
/// ego is still moving.
pub fn safety_shield(action: f64, shield: &ShieldConfig, zone2: Option<f64>, speed: f64) -> f64 {
    match zone2 {
        Some(d) if shield.enabled && d < shield.brake_distance && speed > shield.min_speed => -1.0,
        _ => action,
    }
}

/// Longitudinal acceleration for a normalized pedal action.
pub fn pedal_to_accel(action: f64, accel_max: f64, brake_max: f64) -> f64 {
    if action >= 0.0 {
        action * accel_max
    } else {
        action * brake_max
    }
}

/// Oriented-rectangle overlap between the ego and any active traffic vehicle.
pub fn check_collision(world: &WorldState) -> bool {
    let ego = world.ego.obb();
    world
        .traffic
        .iter()
        .any(|t| t.active && ego.overlaps(&t.state.obb()))
}

#[derive(Debug, Clone)]
pub struct RoundaboutEnv {
    config: EnvConfig,
    layout: Arc<Roundabout>,
    world: WorldState,
}

impl RoundaboutEnv {
    /// Builds the layout and spawns the first episode from `config.seed`.
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let layout = Arc::new(Roundabout::build(config.layout())?);
        let world = spawn_world(&config, &layout, config.seed);
        Ok(Self {
            config,
            layout,
            world,
        })
    }

    /// Shares an already built layout (cheap clone for parallel rollouts).
    pub fn with_layout(config: EnvConfig, layout: Arc<Roundabout>) -> Result<Self> {
        config.validate()?;
        let world = spawn_world(&config, &layout, config.seed);
        Ok(Self {
            config,
            layout,
            world,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn layout(&self) -> &Arc<Roundabout> {
        &self.layout
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn ego_route(&self) -> &RouteGeometry {
        self.layout.route_by_id(self.world.ego.route)
    }

    pub fn set_shield(&mut self, enabled: bool) {
        self.config.shield.enabled = enabled;
    }

    /// Starts a new episode from `seed` and returns the first observation.
    pub fn reset(&mut self, seed: u64) -> Observation {
        self.world = spawn_world(&self.config, &self.layout, seed);
        self.observe()
    }

    pub fn zones(&self) -> ZoneHits {
        let traffic = self
            .world
            .traffic
            .iter()
            .enumerate()
            .filter(|(_, t)| t.active)
            .map(|(i, t)| (i, &t.state));
        detect_zones(&self.config.zones, &self.world.ego, traffic)
    }

    pub fn observe(&self) -> Observation {
        let cfg = &self.config;
        let ego = &self.world.ego;
        let route = self.ego_route();
        let hits = self.zones();
        let closeness = |i: usize| {
            hits.distance[i]
                .map(|d| (cfg.zones.radius[i] - d) / cfg.zones.radius[i])
                .unwrap_or(0.0)
        };
        let leader = hits
            .nearest()
            .map(|(_, idx)| {
                let other = &self.world.traffic[idx].state;
                let along = other.speed * (other.heading - ego.heading).cos();
                ((along - ego.speed) / cfg.reward.v_max).clamp(-1.0, 1.0)
            })
            .unwrap_or(0.0);
        let lookahead = cfg.pursuit().lookahead(ego.speed);
        let curvature = route.curvature_at(ego.progress + lookahead) / CURVATURE_SCALE;
        Observation([
            (ego.speed / cfg.reward.v_max).clamp(-1.0, 1.0),
            closeness(0),
            closeness(1),
            leader,
            (ego.progress / route.length()).clamp(0.0, 1.0),
            curvature.clamp(-1.0, 1.0),
            self.world.prev_action.clamp(-1.0, 1.0),
        ])
    }

    /// Advances the world by one time step under ego pedal action `action`.
    pub fn step(&mut self, action: f64) -> Result<StepResult> {
        if !action.is_finite() || action.abs() > 1.0 {
            return Err(Error::Contract(format!("action {action} outside [-1, 1]")));
        }
        if self.world.cause.is_terminal() {
            return Err(Error::Contract("step called on a finished episode".into()));
        }
        let cfg = &self.config;
        let applied = safety_shield(action, &cfg.shield, self.zones().distance[1], self.world.ego.speed);

        // traffic decides simultaneously from the pre-step state
        let accels: Vec<f64> = (0..self.world.traffic.len())
            .map(|i| {
                if self.world.traffic[i].active {
                    traffic_policy(
                        &cfg.traffic,
                        &self.layout,
                        cfg.accel_max,
                        cfg.brake_max,
                        i,
                        &self.world.ego,
                        &self.world.traffic,
                    )
                } else {
                    0.0
                }
            })
            .collect();

        let pursuit = cfg.pursuit();
        let layout = Arc::clone(&self.layout);
        let route = layout.route_by_id(self.world.ego.route);
        let world = &mut self.world;
        let steer = steering::pure_pursuit_steering(&world.ego, route, world.ego_rear_progress, &pursuit);
        let accel = pedal_to_accel(applied, cfg.accel_max, cfg.brake_max);
        let travel = world.ego.speed * cfg.dt;
        world.ego.integrate_bicycle(accel, steer, cfg.wheelbase, cfg.dt);
        let (s, _) = route.project(world.ego.position(), world.ego.progress, 1.0, travel + 2.0);
        world.ego.progress = s;
        let (s, _) = route.project(
            world.ego.rear_axle(cfg.wheelbase),
            world.ego_rear_progress,
            1.0,
            travel + 2.0,
        );
        world.ego_rear_progress = s;

        for (t, a) in world.traffic.iter_mut().zip(&accels) {
            if t.active {
                let route = t.state.route;
                advance_on_route(&mut t.state, layout.route_by_id(route), *a, cfg.dt);
                if t.state.progress >= layout.route_by_id(t.state.route).length() {
                    t.active = false;
                }
            }
        }
        respawn_traffic(cfg, &layout, world);
        world.step += 1;
        world.prev_action = applied;

        let collision = check_collision(world);
        let hits = self.zones();
        let world = &mut self.world;
        let (r, components) = reward::reward(
            &cfg.reward,
            &cfg.zones,
            world.ego.speed,
            hits.distance,
            applied,
            collision,
        );
        let cause = if collision {
            TerminalCause::Collision
        } else if world.ego.progress >= world.destination.0 {
            TerminalCause::Destination
        } else if world.step >= cfg.max_steps {
            TerminalCause::Timeout
        } else {
            TerminalCause::None
        };
        world.cause = cause;
        Ok(StepResult {
            observation: self.observe(),
            reward: r,
            components,
            applied_action: applied,
            terminal: cause.is_terminal(),
            cause,
        })
    }
}

fn advance_on_route(v: &mut VehicleState, route: &RouteGeometry, accel: f64, dt: f64) {
    v.progress += v.speed * dt;
    v.speed = (v.speed + accel * dt).max(0.0);
    place_on_route(v, route);
}

fn place_on_route(v: &mut VehicleState, route: &RouteGeometry) {
    let [x, y] = route.point_at(v.progress);
    v.x = x;
    v.y = y;
    v.heading = route.heading_at(v.progress);
}

fn new_vehicle(cfg: &EnvConfig, route_id: RouteId, route: &RouteGeometry, progress: f64, speed: f64) -> VehicleState {
    let mut v = VehicleState {
        x: 0.0,
        y: 0.0,
        heading: 0.0,
        speed,
        route: route_id,
        progress,
        length: cfg.vehicle_length,
        width: cfg.vehicle_width,
    };
    place_on_route(&mut v, route);
    v
}

fn random_route(cfg: &EnvConfig, rng: &mut ChaCha8Rng) -> RouteId {
    RouteId::Path {
        entry: rng.random_range(0..cfg.arms),
        exit: rng.random_range(0..cfg.arms),
    }
}

/// Spawns ego and traffic for one episode. Traffic that cannot be placed
/// without violating the spawn clearances is dropped with a warning.
pub fn spawn_world(cfg: &EnvConfig, layout: &Roundabout, seed: u64) -> WorldState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ego_route_id = RouteId::Path {
        entry: cfg.ego_entry,
        exit: cfg.ego_exit,
    };
    let ego_route = layout.route_by_id(ego_route_id);
    let jitter = if cfg.spawn_jitter > 0.0 {
        rng.random_range(-cfg.spawn_jitter..=cfg.spawn_jitter)
    } else {
        0.0
    };
    let ego = new_vehicle(cfg, ego_route_id, ego_route, cfg.ego_start + jitter, 0.0);
    let rear = ego_route.project(ego.rear_axle(cfg.wheelbase), ego.progress, 3.0, 0.5).0;
    let dest_end = ego_route.length() - cfg.destination_margin;
    let destination = (dest_end - cfg.destination_window, dest_end);

    let mut traffic: Vec<TrafficVehicle> = Vec::with_capacity(cfg.n_traffic);
    const ATTEMPTS: usize = 200;
    'outer: for _ in 0..cfg.n_traffic {
        for _ in 0..ATTEMPTS {
            let id = random_route(cfg, &mut rng);
            let route = layout.route_by_id(id);
            let s = rng.random_range(0.0..route.length() - cfg.destination_margin);
            let cand = new_vehicle(cfg, id, route, s, cfg.traffic.target_speed);
            let p = cand.position();
            let clear_ego = geometry::dist(p, ego.position()) > cfg.traffic.ego_clearance;
            let clear = traffic
                .iter()
                .all(|t| geometry::dist(p, t.state.position()) > cfg.traffic.spawn_clearance);
            if clear && clear_ego {
                traffic.push(TrafficVehicle {
                    state: cand,
                    active: true,
                });
                continue 'outer;
            }
        }
        log::warn!(
            "placed only {} of {} traffic vehicles (seed {seed})",
            traffic.len(),
            cfg.n_traffic
        );
        break;
    }
    WorldState {
        ego,
        ego_rear_progress: rear,
        traffic,
        step: 0,
        rng,
        destination,
        prev_action: 0.0,
        cause: TerminalCause::None,
    }
}

/// Re-enters finished traffic at the outer end of a random entry arm once
/// that spawn point is clear.
fn respawn_traffic(cfg: &EnvConfig, layout: &Roundabout, world: &mut WorldState) {
    for i in 0..world.traffic.len() {
        if world.traffic[i].active {
            continue;
        }
        let id = random_route(cfg, &mut world.rng);
        let route = layout.route_by_id(id);
        let cand = new_vehicle(cfg, id, route, 0.0, cfg.traffic.target_speed);
        let p = cand.position();
        let clear = geometry::dist(p, world.ego.position()) > cfg.traffic.respawn_clearance()
            && world.traffic.iter().all(|t| {
                !t.active || geometry::dist(p, t.state.position()) > cfg.traffic.respawn_clearance()
            });
        if clear {
            world.traffic[i] = TrafficVehicle {
                state: cand,
                active: true,
            };
        }
    }
}
