use serde::{Deserialize, Serialize};

use super::geometry::{dist, normalize_angle, Point};
use super::vehicle::VehicleState;

/// Two forward fans `Z_i(alpha_i, R_i)` with apex at the ego front bumper.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionZoneSpec {
    /// Half-angle of each fan around the ego heading, degrees.
    pub half_angle_deg: [f64; 2],
    /// Radius of each fan, meters.
    pub radius: [f64; 2],
    /// Weight of zone 1 in the safety reward; zone 2 gets `1 - weight`.
    pub weight: f64,
}

impl Default for DetectionZoneSpec {
    fn default() -> Self {
        Self {
            half_angle_deg: [60.0, 30.0],
            radius: [10.0, 20.0],
            weight: 0.8,
        }
    }
}

impl DetectionZoneSpec {
    pub fn validate(&self) -> Result<(), String> {
        for i in 0..2 {
            if !(self.radius[i] > 0.0) {
                return Err(format!("zone {} radius must be positive", i + 1));
            }
            if !(self.half_angle_deg[i] > 0.0 && self.half_angle_deg[i] < 180.0) {
                return Err(format!("zone {} angle must lie in (0, 180)", i + 1));
            }
        }
        if !(0.0..=1.0).contains(&self.weight) {
            return Err("zone weight must lie in [0, 1]".into());
        }
        Ok(())
    }
}

/// Nearest detected vehicle per zone.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ZoneHits {
    pub distance: [Option<f64>; 2],
    /// Index into the candidate list of the nearest vehicle per zone.
    pub vehicle: [Option<usize>; 2],
}

impl ZoneHits {
    /// Nearest hit across both zones.
    pub fn nearest(&self) -> Option<(f64, usize)> {
        (0..2)
            .filter_map(|i| Some((self.distance[i]?, self.vehicle[i]?)))
            .min_by(|a, b| a.0.total_cmp(&b.0))
    }
}

/// Whether `target` lies in the fan at `apex` facing `heading`.
pub fn in_sector(apex: Point, heading: f64, target: Point, radius: f64, half_angle: f64) -> Option<f64> {
    let d = dist(apex, target);
    if d > radius {
        return None;
    }
    if d == 0.0 {
        return Some(0.0);
    }
    let bearing = normalize_angle((target[1] - apex[1]).atan2(target[0] - apex[0]) - heading);
    (bearing.abs() <= half_angle).then_some(d)
}

/// Distance from the ego front bumper to the nearest vehicle center inside
/// each fan.
pub fn detect_zones<'a, I>(spec: &DetectionZoneSpec, ego: &VehicleState, others: I) -> ZoneHits
where
    I: IntoIterator<Item = (usize, &'a VehicleState)>,
{
    let apex = ego.front();
    let mut hits = ZoneHits::default();
    for (idx, other) in others {
        for zone in 0..2 {
            let half = spec.half_angle_deg[zone].to_radians();
            if let Some(d) = in_sector(apex, ego.heading, other.position(), spec.radius[zone], half) {
                if hits.distance[zone].is_none_or(|best| d < best) {
                    hits.distance[zone] = Some(d);
                    hits.vehicle[zone] = Some(idx);
                }
            }
        }
    }
    hits
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::geometry::RouteId;

    fn car(x: f64, y: f64) -> VehicleState {
        VehicleState {
            x,
            y,
            heading: 0.0,
            speed: 0.0,
            route: RouteId::Ring,
            progress: 0.0,
            length: 4.5,
            width: 1.9,
        }
    }

    fn detect(ego: &VehicleState, others: &[VehicleState]) -> ZoneHits {
        detect_zones(&DetectionZoneSpec::default(), ego, others.iter().enumerate())
    }

    #[test]
    fn empty_road() {
        let hits = detect(&car(0.0, 0.0), &[]);
        assert_eq!(hits.distance, [None, None]);
    }

    #[test]
    fn dead_ahead_in_both_fans() {
        let ego = car(0.0, 0.0);
        let front = ego.front();
        let hits = detect(&ego, &[car(front[0] + 5.0, 0.0)]);
        assert_eq!(hits.distance, [Some(5.0), Some(5.0)]);
    }

    /// Brute-force oracle: polar test written out from scratch.
    fn oracle(apex: Point, target: Point, radius: f64, half_deg: f64) -> bool {
        let dx = target[0] - apex[0];
        let dy = target[1] - apex[1];
        let r = (dx * dx + dy * dy).sqrt();
        let bearing_deg = dy.atan2(dx).to_degrees();
        r <= radius && bearing_deg.abs() <= half_deg
    }

    #[test]
    fn fifteen_meters_at_twenty_degrees() {
        let ego = car(0.0, 0.0);
        let apex = ego.front();
        let b = 20f64.to_radians();
        let target = [apex[0] + 15.0 * b.cos(), apex[1] + 15.0 * b.sin()];
        assert!(!oracle(apex, target, 10.0, 60.0));
        assert!(oracle(apex, target, 20.0, 30.0));
        let hits = detect(&ego, &[car(target[0], target[1])]);
        assert_eq!(hits.distance[0], None);
        assert!((hits.distance[1].unwrap() - 15.0).abs() < 1e-12);
    }

    #[test]
    fn matches_oracle_on_grid() {
        let ego = car(0.0, 0.0);
        let apex = ego.front();
        let spec = DetectionZoneSpec::default();
        for i in -30..=30 {
            for j in -30..=30 {
                let t = [apex[0] + i as f64 * 0.77, apex[1] + j as f64 * 0.77];
                let hits = detect(&ego, &[car(t[0], t[1])]);
                for z in 0..2 {
                    let expect = oracle(apex, t, spec.radius[z], spec.half_angle_deg[z]);
                    assert_eq!(hits.distance[z].is_some(), expect, "{t:?} zone {z}");
                }
            }
        }
    }

    #[test]
    fn nearest_wins() {
        let ego = car(0.0, 0.0);
        let f = ego.front();
        let hits = detect(&ego, &[car(f[0] + 8.0, 0.0), car(f[0] + 3.0, 0.5)]);
        assert_eq!(hits.vehicle, [Some(1), Some(1)]);
        assert_eq!(hits.nearest().unwrap().1, 1);
    }
}
