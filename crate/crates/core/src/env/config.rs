use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::geometry::LayoutParams;
use super::reward::RewardParams;
use super::steering::PursuitParams;
use super::traffic::TrafficParams;
use super::zones::DetectionZoneSpec;
use crate::error::{Error, Result};

/// Rule-based emergency brake layered on top of any controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShieldConfig {
    pub enabled: bool,
    /// Zone-2 distance below which the shield brakes, meters.
    pub brake_distance: f64,
    /// Ego speed at or below which the shield stays passive, m/s.
    pub min_speed: f64,
}

impl Default for ShieldConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            brake_distance: 6.0,
            min_speed: 0.5,
        }
    }
}

/// Environment configuration, loadable from a TOML key-value file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub seed: u64,
    pub ring_radius: f64,
    pub arm_length: f64,
    pub fillet_radius: f64,
    pub arms: usize,
    pub ego_entry: usize,
    pub ego_exit: usize,
    /// Nominal ego spawn position along its route, meters.
    pub ego_start: f64,
    /// Uniform spawn jitter around `ego_start`, meters.
    pub spawn_jitter: f64,
    pub destination_window: f64,
    /// Distance from the end of the ego route to the end of the destination window.
    pub destination_margin: f64,
    pub n_traffic: usize,
    pub dt: f64,
    pub max_steps: u32,
    pub vehicle_length: f64,
    pub vehicle_width: f64,
    pub wheelbase: f64,
    pub accel_max: f64,
    pub brake_max: f64,
    pub lookahead_gain: f64,
    pub lookahead_min: f64,
    pub lookahead_max: f64,
    pub max_steer_deg: f64,
    pub zones: DetectionZoneSpec,
    pub reward: RewardParams,
    pub traffic: TrafficParams,
    pub shield: ShieldConfig,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            ring_radius: 20.0,
            arm_length: 50.0,
            fillet_radius: 8.0,
            arms: 4,
            ego_entry: 0,
            ego_exit: 2,
            ego_start: 10.0,
            spawn_jitter: 3.0,
            destination_window: 5.0,
            destination_margin: 10.0,
            n_traffic: 20,
            dt: 0.1,
            max_steps: 800,
            vehicle_length: 4.5,
            vehicle_width: 1.9,
            wheelbase: 2.85,
            accel_max: 3.0,
            brake_max: 6.0,
            lookahead_gain: 1.0,
            lookahead_min: 4.0,
            lookahead_max: 12.0,
            max_steer_deg: 35.0,
            zones: DetectionZoneSpec::default(),
            reward: RewardParams::default(),
            traffic: TrafficParams::default(),
            shield: ShieldConfig::default(),
        }
    }
}

impl EnvConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: EnvConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("environment config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("environment config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.ring_radius > 0.0) {
            return fail("ring_radius must be positive");
        }
        if self.arms == 0 || self.ego_entry >= self.arms || self.ego_exit >= self.arms {
            return fail("ego_entry / ego_exit must index an arm");
        }
        if !(self.dt > 0.0) || self.max_steps == 0 {
            return fail("dt and max_steps must be positive");
        }
        if !(self.accel_max > 0.0 && self.brake_max > 0.0) {
            return fail("actuation limits must be positive");
        }
        if !(self.wheelbase > 0.0 && self.vehicle_length > 0.0 && self.vehicle_width > 0.0) {
            return fail("vehicle dimensions must be positive");
        }
        if !(self.lookahead_min > 0.0 && self.lookahead_max >= self.lookahead_min) {
            return fail("lookahead bounds are inconsistent");
        }
        if !(self.ego_start - self.spawn_jitter >= 0.0) {
            return fail("ego spawn window starts before the route");
        }
        self.zones.validate().map_err(Error::Config)?;
        if !(self.reward.v_max > 0.0 && self.reward.v_min >= 0.0) {
            return fail("reward speed thresholds are invalid");
        }
        Ok(())
    }

    pub fn layout(&self) -> LayoutParams {
        LayoutParams {
            ring_radius: self.ring_radius,
            arm_length: self.arm_length,
            fillet_radius: self.fillet_radius,
            arms: self.arms,
        }
    }

    pub fn pursuit(&self) -> PursuitParams {
        PursuitParams {
            wheelbase: self.wheelbase,
            lookahead_gain: self.lookahead_gain,
            lookahead_min: self.lookahead_min,
            lookahead_max: self.lookahead_max,
            max_steer: self.max_steer_deg.to_radians(),
        }
    }

    /// SHA-256 of the dynamics-relevant configuration, hex encoded.
    ///
    /// The seed and the shield settings are excluded: they select an episode
    /// stream or wrap the controller, and do not change what a transition means.
    pub fn dynamics_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.seed = 0;
        canonical.shield = ShieldConfig::default();
        let json = serde_json::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
