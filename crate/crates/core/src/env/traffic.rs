//! Scripted surrounding traffic: cruise toward a target speed, emergency stop
//! when anything enters the forward sector.

use serde::{Deserialize, Serialize};

use super::geometry::{dist, Roundabout, RouteId};
use super::vehicle::VehicleState;
use super::zones::in_sector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficParams {
    /// Cruise speed, m/s.
    pub target_speed: f64,
    /// Proportional speed gain, 1/s.
    pub speed_gain: f64,
    /// Base radius of the emergency-stop sector, meters; the sector grows by
    /// the braking distance `v^2 / (2 b_max)` at the current speed.
    pub brake_range: f64,
    /// Half-angle of the emergency-stop sector, degrees.
    pub brake_half_angle_deg: f64,
    /// Half-width of the lane corridor ahead that also triggers a stop, meters.
    pub corridor_half_width: f64,
    /// Time gap an entering vehicle needs to circulating traffic, seconds.
    pub yield_gap_time: f64,
    /// Distance added to the time gap, meters.
    pub yield_gap_margin: f64,
    /// Minimum center distance between vehicles when spawning, meters.
    pub spawn_clearance: f64,
    /// Minimum center distance to the ego when spawning, meters.
    pub ego_clearance: f64,
}

impl Default for TrafficParams {
    fn default() -> Self {
        Self {
            target_speed: 8.0,
            speed_gain: 1.0,
            brake_range: 5.0,
            brake_half_angle_deg: 30.0,
            corridor_half_width: 2.2,
            yield_gap_time: 3.0,
            yield_gap_margin: 6.0,
            spawn_clearance: 10.0,
            ego_clearance: 15.0,
        }
    }
}

/// One surrounding vehicle. Inactive vehicles have finished their route and
/// wait for a free spawn point; they are invisible to everyone.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficVehicle {
    pub state: VehicleState,
    pub active: bool,
}

impl TrafficParams {
    /// Clearance required at an arm entrance before a finished vehicle re-enters.
    pub fn respawn_clearance(&self) -> f64 {
        2.0 * self.spawn_clearance
    }

    pub fn sector_range(&self, speed: f64, brake_max: f64) -> f64 {
        self.brake_range + speed * speed / (2.0 * brake_max)
    }

    /// `other` is in the forward sector or on the lane ahead of `me`.
    fn blocks(&self, layout: &Roundabout, me: &VehicleState, other: &VehicleState, brake_max: f64) -> bool {
        let range = self.sector_range(me.speed, brake_max);
        if dist(me.position(), other.position()) > range + me.length {
            return false;
        }
        if in_sector(me.front(), me.heading, other.position(), range, self.brake_half_angle_deg.to_radians()).is_some() {
            return true;
        }
        let route = layout.route_by_id(me.route);
        let start = me.progress + 0.5 * me.length;
        let steps = range.ceil() as usize;
        (0..=steps).any(|k| {
            let s = start + range * k as f64 / steps.max(1) as f64;
            if !route.is_closed() && s > route.length() {
                return false;
            }
            dist(route.point_at(s), other.position()) < self.corridor_half_width
        })
    }
}

/// Acceleration cap for a vehicle approaching its entry: stop at the yield
/// line while a circulating vehicle is within the accepted gap of the merge
/// point. `None` when no constraint applies (not approaching, already past
/// the line, or the gap is clear).
pub fn entry_yield_accel<'a>(
    params: &TrafficParams,
    layout: &Roundabout,
    me: &VehicleState,
    others: impl IntoIterator<Item = &'a VehicleState>,
    brake_max: f64,
) -> Option<f64> {
    let RouteId::Path { entry, .. } = me.route else {
        return None;
    };
    let to_line = layout.yield_progress - (me.progress + 0.5 * me.length);
    if to_line < 0.0 || me.progress >= layout.merge_progress {
        return None;
    }
    let merge = layout.merge_angle(entry);
    let conflict = others.into_iter().any(|o| {
        if !layout.on_ring(o.route, o.progress) {
            return false;
        }
        let theta = o.y.atan2(o.x);
        let upstream = layout.ring_arc(theta, merge);
        let downstream = layout.ring_arc(merge, theta);
        upstream < o.speed * params.yield_gap_time + params.yield_gap_margin || downstream < o.length + 1.0
    });
    if !conflict {
        return None;
    }
    // aim half a meter short of the line so a waiting vehicle never creeps over it
    let room = to_line - 0.5;
    if room <= 0.05 {
        return Some(-brake_max);
    }
    Some((-me.speed * me.speed / (2.0 * room)).max(-brake_max))
}

/// Longitudinal acceleration of traffic vehicle `index`.
///
/// Brakes fully when the ego or another active vehicle is inside the forward
/// sector or on the lane just ahead. When two traffic vehicles block each
/// other, the one with the lower index keeps going so merges cannot
/// deadlock. Before entering the ring, waits at the yield line for a gap.
pub fn traffic_policy(
    params: &TrafficParams,
    layout: &Roundabout,
    accel_max: f64,
    brake_max: f64,
    index: usize,
    ego: &VehicleState,
    traffic: &[TrafficVehicle],
) -> f64 {
    let me = &traffic[index].state;
    let mut danger = params.blocks(layout, me, ego, brake_max);
    if !danger {
        danger = traffic.iter().enumerate().any(|(j, other)| {
            j != index
                && other.active
                && params.blocks(layout, me, &other.state, brake_max)
                && !(index < j && params.blocks(layout, &other.state, me, brake_max))
        });
    }
    if danger {
        return -brake_max;
    }
    let cruise = (params.speed_gain * (params.target_speed - me.speed)).clamp(-brake_max, accel_max);
    let others = traffic
        .iter()
        .enumerate()
        .filter(|(j, t)| *j != index && t.active)
        .map(|(_, t)| &t.state)
        .chain(std::iter::once(ego));
    match entry_yield_accel(params, layout, me, others, brake_max) {
        Some(cap) => cruise.min(cap),
        None => cruise,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::geometry::RouteId;

    fn car(x: f64, y: f64, heading: f64, speed: f64) -> VehicleState {
        VehicleState {
            x,
            y,
            heading,
            speed,
            route: RouteId::Ring,
            progress: 0.0,
            length: 4.5,
            width: 1.9,
        }
    }

    fn accel(me: VehicleState, others: Vec<VehicleState>, ego: VehicleState) -> f64 {
        let mut traffic = vec![TrafficVehicle { state: me, active: true }];
        traffic.extend(others.into_iter().map(|s| TrafficVehicle { state: s, active: true }));
        traffic_policy(&TrafficParams::default(), &layout(), 3.0, 6.0, 0, &ego, &traffic)
    }

    fn layout() -> Roundabout {
        Roundabout::build(crate::env::EnvConfig::default().layout()).unwrap()
    }

    fn far_ego() -> VehicleState {
        car(1000.0, 1000.0, 0.0, 0.0)
    }

    #[test]
    fn setpoint_and_cap() {
        assert_eq!(accel(car(0.0, 0.0, 0.0, 8.0), vec![], far_ego()), 0.0);
        assert_eq!(accel(car(0.0, 0.0, 0.0, 0.0), vec![], far_ego()), 3.0);
    }

    #[test]
    fn close_leader_triggers_full_brake() {
        let me = car(0.0, 0.0, 0.0, 8.0);
        let leader_x = me.front()[0] + 3.0;
        assert_eq!(accel(me.clone(), vec![car(leader_x, 0.0, 0.0, 8.0)], far_ego()), -6.0);
        // the ego counts as well
        assert_eq!(accel(me, vec![], car(leader_x, 0.0, 0.0, 0.0)), -6.0);
    }

    #[test]
    fn mutual_detection_lets_lower_index_pass() {
        // two vehicles nose to nose
        let a = car(0.0, 0.0, 0.0, 5.0);
        let b = car(8.0, 0.0, std::f64::consts::PI, 5.0);
        let traffic = vec![
            TrafficVehicle { state: a, active: true },
            TrafficVehicle { state: b, active: true },
        ];
        let p = TrafficParams::default();
        assert!(traffic_policy(&p, &layout(), 3.0, 6.0, 0, &far_ego(), &traffic) > -6.0);
        assert_eq!(traffic_policy(&p, &layout(), 3.0, 6.0, 1, &far_ego(), &traffic), -6.0);
    }

    #[test]
    fn inactive_vehicles_are_ignored() {
        let me = car(0.0, 0.0, 0.0, 8.0);
        let leader_x = me.front()[0] + 3.0;
        let traffic = vec![
            TrafficVehicle { state: me, active: true },
            TrafficVehicle { state: car(leader_x, 0.0, 0.0, 0.0), active: false },
        ];
        assert_eq!(traffic_policy(&TrafficParams::default(), &layout(), 3.0, 6.0, 0, &far_ego(), &traffic), 0.0);
    }
}
