use serde::{Deserialize, Serialize};

use super::zones::DetectionZoneSpec;

/// Constants of the four-term driving reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardParams {
    /// Speed limit, m/s.
    pub v_max: f64,
    /// Below this speed a braking action removes the safety penalty, m/s.
    pub v_min: f64,
    pub step_penalty: f64,
    pub collision_penalty: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            v_max: 12.0,
            v_min: 0.1,
            step_penalty: -0.1,
            collision_penalty: -10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardComponents {
    pub speed: f64,
    pub step: f64,
    pub collision: f64,
    pub safety: f64,
}

impl RewardComponents {
    pub fn total(&self) -> f64 {
        self.speed + self.step + self.collision + self.safety
    }
}

/// Efficiency term: pays the speed, and penalizes exceeding the limit.
pub fn speed_reward(v: f64, v_max: f64) -> f64 {
    if v >= v_max {
        v + 2.0 * (v_max - v)
    } else {
        v
    }
}

/// Speed regulator: zero when the ego is (nearly) stopped and braking.
pub fn safe_speed(v: f64, action: f64, v_min: f64) -> f64 {
    if v <= v_min && action < 0.0 {
        0.0
    } else {
        v
    }
}

/// Potential-danger term from the two detection fans; never positive.
pub fn safety_reward(zones: &DetectionZoneSpec, distance: [Option<f64>; 2], v_safe: f64) -> f64 {
    let [r1, r2] = zones.radius;
    let mut danger = 0.0;
    if let Some(d1) = distance[0] {
        danger += zones.weight * (r1 - d1) / r1;
    }
    if let Some(d2) = distance[1] {
        danger += (1.0 - zones.weight) * (r2 - d2) / r2;
    }
    -danger * v_safe
}

/// Full reward for one transition, evaluated on the post-step speed and zone
/// detections with the executed action.
pub fn reward(
    params: &RewardParams,
    zones: &DetectionZoneSpec,
    speed: f64,
    distance: [Option<f64>; 2],
    action: f64,
    collision: bool,
) -> (f64, RewardComponents) {
    let components = RewardComponents {
        speed: speed_reward(speed, params.v_max),
        step: params.step_penalty,
        collision: if collision { params.collision_penalty } else { 0.0 },
        safety: safety_reward(zones, distance, safe_speed(speed, action, params.v_min)),
    };
    (components.total(), components)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(v: f64, d: [Option<f64>; 2], a: f64, col: bool) -> (f64, RewardComponents) {
        reward(&RewardParams::default(), &DetectionZoneSpec::default(), v, d, a, col)
    }

    #[test]
    fn standing_still() {
        let (r, c) = eval(0.0, [None, None], 0.0, false);
        assert_eq!(r, -0.1);
        assert_eq!(c.step, -0.1);
    }

    #[test]
    fn cruising() {
        assert_eq!(eval(6.0, [None, None], 0.3, false).0, 6.0 - 0.1);
    }

    #[test]
    fn over_the_limit() {
        assert_eq!(speed_reward(14.0, 12.0), 10.0);
        assert_eq!(speed_reward(12.0, 12.0), 12.0);
    }

    #[test]
    fn near_zone_one() {
        let (_, c) = eval(5.0, [Some(5.0), None], 0.5, false);
        assert_eq!(c.safety, -2.0);
    }

    #[test]
    fn braking_while_stopped_removes_penalty() {
        assert_eq!(safe_speed(0.05, -0.5, 0.1), 0.0);
        let (_, c) = eval(0.05, [Some(1.0), Some(1.0)], -0.5, false);
        assert_eq!(c.safety, 0.0);
    }

    #[test]
    fn collision_term() {
        let (r, c) = eval(3.0, [None, None], 0.0, true);
        assert_eq!(c.collision, -10.0);
        assert_eq!(r, 3.0 - 0.1 - 10.0);
    }
}
