use super::geometry::{normalize_angle, RouteGeometry};
use super::vehicle::VehicleState;

/// Pure-pursuit parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PursuitParams {
    pub wheelbase: f64,
    /// Lookahead = clamp(gain * v, min, max).
    pub lookahead_gain: f64,
    pub lookahead_min: f64,
    pub lookahead_max: f64,
    pub max_steer: f64,
}

impl PursuitParams {
    pub fn lookahead(&self, speed: f64) -> f64 {
        (self.lookahead_gain * speed).clamp(self.lookahead_min, self.lookahead_max)
    }
}

/// Geometric pure-pursuit law for a target at bearing `alpha` and distance
/// `lookahead` from the rear axle.
pub fn pursuit_angle(alpha: f64, lookahead: f64, wheelbase: f64, max_steer: f64) -> f64 {
    (2.0 * wheelbase * alpha.sin())
        .atan2(lookahead)
        .clamp(-max_steer, max_steer)
}

/// Steering command tracking `route`. `rear_progress` is the arc length of
/// the rear axle's projection onto the route.
pub fn pure_pursuit_steering(
    vehicle: &VehicleState,
    route: &RouteGeometry,
    rear_progress: f64,
    params: &PursuitParams,
) -> f64 {
    let ld = params.lookahead(vehicle.speed);
    let rear = vehicle.rear_axle(params.wheelbase);
    let target = route.point_at(rear_progress + ld);
    let dx = target[0] - rear[0];
    let dy = target[1] - rear[1];
    let distance = dx.hypot(dy);
    if distance < 1e-9 {
        return 0.0;
    }
    let alpha = normalize_angle(dy.atan2(dx) - vehicle.heading);
    pursuit_angle(alpha, distance, params.wheelbase, params.max_steer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    const MAX: f64 = 35.0 * std::f64::consts::PI / 180.0;

    #[test]
    fn dead_ahead_is_zero() {
        assert_eq!(pursuit_angle(0.0, 5.0, 2.85, MAX), 0.0);
    }

    #[test]
    fn right_angle_target_saturates() {
        let raw = (2.0f64 * 2.85).atan2(5.0);
        assert!((raw - 0.851).abs() < 1e-3);
        let d = pursuit_angle(FRAC_PI_2, 5.0, 2.85, MAX);
        assert!((d - MAX).abs() < 1e-12);
        assert!((d - 0.611).abs() < 1e-3);
    }

    #[test]
    fn mirrored_target_negates() {
        for a in [0.05, 0.2, 0.7, 1.3] {
            assert_eq!(pursuit_angle(-a, 6.0, 2.85, MAX), -pursuit_angle(a, 6.0, 2.85, MAX));
        }
    }
}
