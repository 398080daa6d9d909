use serde::{Deserialize, Serialize};

use crate::env::{entry_yield_accel, RoundaboutEnv};

/// Intelligent-driver-model parameters for the scripted demonstrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScriptedExpertConfig {
    /// Desired speed, m/s.
    pub desired_speed: f64,
    /// Time headway, s.
    pub time_headway: f64,
    /// Minimum gap, m.
    pub min_gap: f64,
    pub max_accel: f64,
    pub comfortable_decel: f64,
    pub exponent: f64,
    /// Wait at the yield line for a gap in circulating traffic.
    pub yield_at_entry: bool,
}

impl Default for ScriptedExpertConfig {
    fn default() -> Self {
        Self {
            desired_speed: 11.0,
            time_headway: 1.2,
            min_gap: 2.5,
            max_accel: 3.0,
            comfortable_decel: 3.0,
            exponent: 4.0,
            yield_at_entry: true,
        }
    }
}

impl ScriptedExpertConfig {
    pub fn validate(&self) -> Result<(), String> {
        let all = [
            self.desired_speed,
            self.time_headway,
            self.min_gap,
            self.max_accel,
            self.comfortable_decel,
            self.exponent,
        ];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err("expert parameters must all be positive".into())
        }
    }
}

/// Bumper gap and closing speed (`v - v_leader`) to a leader.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leader {
    pub gap: f64,
    pub closing_speed: f64,
}

/// IDM acceleration, m/s^2.
pub fn idm_acceleration(p: &ScriptedExpertConfig, speed: f64, leader: Option<Leader>) -> f64 {
    let free = 1.0 - (speed / p.desired_speed).powf(p.exponent);
    let interaction = leader.map_or(0.0, |l| {
        let desired = p.min_gap
            + speed * p.time_headway
            + speed * l.closing_speed / (2.0 * (p.max_accel * p.comfortable_decel).sqrt());
        let desired = desired.max(0.0);
        (desired / l.gap).powi(2)
    });
    p.max_accel * (free - interaction)
}

/// Smallest bumper gap the model will divide by.
const MIN_GAP: f64 = 0.1;

/// Zone-2 leader as seen by the ego: distance from the front bumper to the
/// leader's rear, and closing speed along the ego heading.
pub fn zone_leader(env: &RoundaboutEnv) -> Option<Leader> {
    let hits = env.zones();
    let (d, idx) = (hits.distance[1]?, hits.vehicle[1]?);
    let ego = &env.world().ego;
    let other = &env.world().traffic[idx].state;
    let along = other.speed * (other.heading - ego.heading).cos();
    Some(Leader {
        gap: (d - 0.5 * other.length).max(MIN_GAP),
        closing_speed: ego.speed - along,
    })
}

/// Normalized pedal action of the scripted expert for the current world.
pub fn scripted_expert_action(p: &ScriptedExpertConfig, env: &RoundaboutEnv) -> f64 {
    let cfg = env.config();
    let world = env.world();
    let mut accel = idm_acceleration(p, world.ego.speed, zone_leader(env));
    if p.yield_at_entry {
        let others = world.traffic.iter().filter(|t| t.active).map(|t| &t.state);
        if let Some(cap) = entry_yield_accel(&cfg.traffic, env.layout(), &world.ego, others, cfg.brake_max) {
            accel = accel.min(cap);
        }
    }
    let action = if accel >= 0.0 {
        accel / cfg.accel_max
    } else {
        accel / cfg.brake_max
    };
    action.clamp(-1.0, 1.0)
}
