//! Polyline routes and the roundabout layout.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Sampling step for generated route polylines, in meters.
const SAMPLE_SPACING: f64 = 0.5;

/// A polyline parameterized by arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteGeometry {
    points: Vec<Point>,
    /// Cumulative arc length at each point; for closed routes one extra entry
    /// holds the length of the closing segment.
    cumulative: Vec<f64>,
    /// Signed curvature at each point (left turn positive).
    curvature: Vec<f64>,
    closed: bool,
}

impl RouteGeometry {
    pub fn new(points: Vec<Point>, closed: bool) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Config("route needs at least two waypoints".into()));
        }
        let n = points.len();
        let segs = if closed { n } else { n - 1 };
        let mut cumulative = Vec::with_capacity(segs + 1);
        cumulative.push(0.0);
        for i in 0..segs {
            let d = dist(points[i], points[(i + 1) % n]);
            if d <= 1e-9 {
                return Err(Error::Config(format!("duplicate consecutive waypoints at {i}")));
            }
            cumulative.push(cumulative[i] + d);
        }
        let curvature = (0..n)
            .map(|i| {
                if !closed && (i == 0 || i == n - 1) {
                    return 0.0;
                }
                let prev = points[(i + n - 1) % n];
                let next = points[(i + 1) % n];
                let h0 = heading_of(prev, points[i]);
                let h1 = heading_of(points[i], next);
                let ds = 0.5 * (dist(prev, points[i]) + dist(points[i], next));
                normalize_angle(h1 - h0) / ds
            })
            .collect();
        Ok(Self {
            points,
            cumulative,
            curvature,
            closed,
        })
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    /// Wraps (closed) or clamps (open) an arc length into the valid range.
    pub fn normalize_s(&self, s: f64) -> f64 {
        let len = self.length();
        if self.closed {
            s.rem_euclid(len)
        } else {
            s.clamp(0.0, len)
        }
    }

    /// Segment index and fractional position for arc length `s`.
    fn locate(&self, s: f64) -> (usize, f64) {
        let s = self.normalize_s(s);
        let segs = self.cumulative.len() - 1;
        let i = match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&s).unwrap())
        {
            Ok(i) => i.min(segs - 1),
            Err(i) => (i - 1).min(segs - 1),
        };
        let seg_len = self.cumulative[i + 1] - self.cumulative[i];
        (i, ((s - self.cumulative[i]) / seg_len).clamp(0.0, 1.0))
    }

    fn segment(&self, i: usize) -> (Point, Point) {
        (self.points[i], self.points[(i + 1) % self.points.len()])
    }

    pub fn point_at(&self, s: f64) -> Point {
        let (i, t) = self.locate(s);
        let (a, b) = self.segment(i);
        [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
    }

    pub fn heading_at(&self, s: f64) -> f64 {
        let (i, _) = self.locate(s);
        let (a, b) = self.segment(i);
        heading_of(a, b)
    }

    pub fn curvature_at(&self, s: f64) -> f64 {
        let (i, t) = self.locate(s);
        let n = self.points.len();
        let j = (i + 1) % n;
        (1.0 - t) * self.curvature[i] + t * self.curvature[j]
    }

    /// Closest point on the route to `p`, searched within `[hint - back, hint + ahead]`.
    ///
    /// Returns the arc length (unwrapped, so it may exceed the length of a
    /// closed route) and the unsigned distance to the route.
    pub fn project(&self, p: Point, hint: f64, back: f64, ahead: f64) -> (f64, f64) {
        let lo = hint - back;
        let hi = hint + ahead;
        let (mut best_s, mut best_d) = (hint, f64::INFINITY);
        let mut s = lo;
        // walk segment by segment over the window
        while s <= hi {
            let (i, _) = self.locate(s);
            let (a, b) = self.segment(i);
            let (t, d) = project_on_segment(p, a, b);
            let seg_start = self.cumulative[i];
            let seg_len = self.cumulative[i + 1] - seg_start;
            let wrapped = self.normalize_s(s);
            let base = s - (wrapped - seg_start);
            let cand = (base + t * seg_len).clamp(lo, hi);
            if d < best_d {
                best_d = d;
                best_s = cand;
            }
            s = base + seg_len + 1e-9;
            if !self.closed && s > self.length() {
                break;
            }
        }
        if !self.closed {
            best_s = best_s.clamp(0.0, self.length());
        }
        (best_s, best_d)
    }
}

fn project_on_segment(p: Point, a: Point, b: Point) -> (f64, f64) {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let t = ((ap[0] * ab[0] + ap[1] * ab[1]) / (ab[0] * ab[0] + ab[1] * ab[1])).clamp(0.0, 1.0);
    let q = [a[0] + t * ab[0], a[1] + t * ab[1]];
    (t, dist(p, q))
}

pub fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn heading_of(a: Point, b: Point) -> f64 {
    (b[1] - a[1]).atan2(b[0] - a[0])
}

/// Wraps an angle into (-pi, pi].
pub fn normalize_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

fn rotate(p: Point, angle: f64) -> Point {
    let (s, c) = angle.sin_cos();
    [c * p[0] - s * p[1], s * p[0] + c * p[1]]
}

/// Layout parameters of the roundabout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayoutParams {
    /// Radius of the circulating lane centerline.
    pub ring_radius: f64,
    /// Length of each straight approach / departure arm.
    pub arm_length: f64,
    /// Radius of the curve joining an arm to the ring.
    pub fillet_radius: f64,
    /// Number of entry arms; exits sit halfway between consecutive entries.
    pub arms: usize,
}

/// Ring plus every entry-to-exit route. Circulation is counter-clockwise.
#[derive(Debug, Clone)]
pub struct Roundabout {
    pub params: LayoutParams,
    pub ring: RouteGeometry,
    /// `routes[entry * arms + exit]`.
    routes: Vec<RouteGeometry>,
    /// Arc length along any path route where it joins the ring.
    pub merge_progress: f64,
    /// Arc length along any path route of the yield line, where the lane is
    /// still [`YIELD_CLEARANCE`] from the ring centerline.
    pub yield_progress: f64,
    /// Angle between an entry arm and the point where its path joins the ring.
    pub join_angle: f64,
}

/// Distance from the ring centerline at which entering vehicles wait.
pub const YIELD_CLEARANCE: f64 = 3.5;

impl Roundabout {
    pub fn build(params: LayoutParams) -> Result<Self> {
        let LayoutParams {
            ring_radius: r,
            arm_length,
            fillet_radius: rf,
            arms,
        } = params;
        if !(r > 0.0) || !(arm_length > 0.0) || !(rf > 0.0) || arms == 0 {
            return Err(Error::Config(format!("invalid roundabout layout {params:?}")));
        }
        let half_gap = PI / arms as f64;
        let join = rf.atan2(((r + rf).powi(2) - rf * rf).sqrt());
        if 2.0 * join >= half_gap {
            return Err(Error::Config(
                "fillet radius too large for the number of arms".into(),
            ));
        }
        let ring_n = ((TAU * r) / SAMPLE_SPACING).ceil() as usize;
        let ring_pts = (0..ring_n)
            .map(|k| {
                let a = TAU * k as f64 / ring_n as f64;
                [r * a.cos(), r * a.sin()]
            })
            .collect();
        let ring = RouteGeometry::new(ring_pts, true)?;
        let entry_local = entry_curve(r, arm_length, rf);
        let mut routes = Vec::with_capacity(arms * arms);
        for entry in 0..arms {
            for exit in 0..arms {
                let entry_angle = entry as f64 * 2.0 * half_gap;
                let exit_angle = entry_angle + (2 * ((exit + arms - entry) % arms) + 1) as f64 * half_gap;
                let mut pts: Vec<Point> = entry_local.iter().map(|&p| rotate(p, entry_angle)).collect();
                let a0 = entry_angle + join;
                let a1 = exit_angle - join;
                let sweep = a1 - a0;
                let n = (sweep * r / SAMPLE_SPACING).ceil().max(1.0) as usize;
                for k in 1..n {
                    let a = a0 + sweep * k as f64 / n as f64;
                    pts.push([r * a.cos(), r * a.sin()]);
                }
                // exit curve is the mirror image of the entry curve, reversed
                pts.extend(
                    entry_local
                        .iter()
                        .rev()
                        .map(|&[x, y]| rotate([x, -y], exit_angle)),
                );
                routes.push(RouteGeometry::new(pts, false)?);
            }
        }
        let merge_progress = routes[0].cumulative()[entry_local.len() - 1];
        let yield_index = entry_local
            .iter()
            .rposition(|&[x, y]| (x.hypot(y) - r).abs() >= YIELD_CLEARANCE)
            .unwrap_or(0);
        let yield_progress = routes[0].cumulative()[yield_index];
        Ok(Self {
            params,
            ring,
            routes,
            merge_progress,
            yield_progress,
            join_angle: join,
        })
    }

    /// Ring angle where paths from `entry` merge in.
    pub fn merge_angle(&self, entry: usize) -> f64 {
        self.entry_angle(entry) + self.join_angle
    }

    /// Arc length along `id` where it leaves the ring.
    pub fn diverge_progress(&self, id: RouteId) -> f64 {
        match id {
            RouteId::Ring => f64::INFINITY,
            RouteId::Path { .. } => self.route_by_id(id).length() - self.merge_progress,
        }
    }

    /// True while a vehicle at `progress` on `id` occupies the circulating lane.
    pub fn on_ring(&self, id: RouteId, progress: f64) -> bool {
        match id {
            RouteId::Ring => true,
            RouteId::Path { .. } => progress >= self.merge_progress && progress <= self.diverge_progress(id),
        }
    }

    /// Counter-clockwise arc distance along the ring from angle `from` to `to`.
    pub fn ring_arc(&self, from: f64, to: f64) -> f64 {
        (to - from).rem_euclid(TAU) * self.params.ring_radius
    }

    pub fn route(&self, entry: usize, exit: usize) -> &RouteGeometry {
        &self.routes[entry * self.params.arms + exit]
    }

    pub fn route_by_id(&self, id: RouteId) -> &RouteGeometry {
        match id {
            RouteId::Ring => &self.ring,
            RouteId::Path { entry, exit } => self.route(entry, exit),
        }
    }

    pub fn entry_angle(&self, entry: usize) -> f64 {
        TAU * entry as f64 / self.params.arms as f64
    }
}

/// Which route a vehicle follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RouteId {
    Ring,
    Path { entry: usize, exit: usize },
}

/// Entry approach in the arm frame (arm along +x): straight inbound segment
/// then a right-hand curve that joins the ring tangentially.
fn entry_curve(r: f64, arm_length: f64, rf: f64) -> Vec<Point> {
    let cx = ((r + rf).powi(2) - rf * rf).sqrt();
    let mut pts = Vec::new();
    let n_straight = (arm_length / SAMPLE_SPACING).ceil() as usize;
    for k in 0..n_straight {
        let x = cx + arm_length * (1.0 - k as f64 / n_straight as f64);
        pts.push([x, 0.0]);
    }
    // clockwise arc around (cx, rf) from -pi/2 to the ring tangent point
    let start = -FRAC_PI_2;
    let end = (-rf).atan2(-cx);
    let sweep = normalize_angle(end - start);
    let n_arc = ((sweep.abs() * rf) / SAMPLE_SPACING).ceil() as usize;
    for k in 0..=n_arc {
        let a = start + sweep * k as f64 / n_arc as f64;
        pts.push([cx + rf * a.cos(), rf + rf * a.sin()]);
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout() -> LayoutParams {
        LayoutParams {
            ring_radius: 20.0,
            arm_length: 50.0,
            fillet_radius: 8.0,
            arms: 4,
        }
    }

    #[test]
    fn merge_and_yield_points() {
        let rb = Roundabout::build(layout()).unwrap();
        let route = rb.route(0, 2);
        let [x, y] = route.point_at(rb.merge_progress);
        assert!((x.hypot(y) - 20.0).abs() < 0.05);
        assert!((y.atan2(x) - rb.merge_angle(0)).abs() < 0.01);
        let [x, y] = route.point_at(rb.yield_progress);
        assert!(x.hypot(y) - 20.0 >= YIELD_CLEARANCE - 1e-9);
        assert!(rb.yield_progress > 50.0 && rb.yield_progress < rb.merge_progress);
        let out = rb.diverge_progress(RouteId::Path { entry: 0, exit: 2 });
        let [x, y] = route.point_at(out);
        assert!((x.hypot(y) - 20.0).abs() < 0.05);
        assert!(rb.on_ring(RouteId::Path { entry: 0, exit: 2 }, rb.merge_progress + 1.0));
        assert!(!rb.on_ring(RouteId::Path { entry: 0, exit: 2 }, rb.yield_progress));
        assert!((rb.ring_arc(0.1, 0.0) - (TAU - 0.1) * 20.0).abs() < 1e-9);
    }

    #[test]
    fn arc_length_is_strictly_increasing() {
        let rb = Roundabout::build(layout()).unwrap();
        for e in 0..4 {
            for x in 0..4 {
                let route = rb.route(e, x);
                assert!(route.cumulative().windows(2).all(|w| w[1] > w[0]));
            }
        }
        assert!((rb.ring.length() - TAU * 20.0).abs() < 0.01);
    }

    #[test]
    fn routes_join_ring_smoothly() {
        let rb = Roundabout::build(layout()).unwrap();
        let route = rb.route(0, 2);
        let pts = route.points();
        // no heading jump larger than a few degrees between consecutive segments
        for w in pts.windows(3) {
            let turn = normalize_angle(heading_of(w[1], w[2]) - heading_of(w[0], w[1]));
            assert!(turn.abs() < 0.1, "turn {turn}");
        }
        // starts on the entry arm heading inward, ends heading outward along the exit arm
        let start = pts[0];
        assert!(start[1].abs() < 1e-9 && start[0] > 70.0);
        let end = *pts.last().unwrap();
        let exit_angle = 2.0 * PI * 2.5 / 4.0;
        assert!((end[1].atan2(end[0]) - normalize_angle(exit_angle)).abs() < 1e-9);
    }

    #[test]
    fn point_lookup_lies_on_polyline() {
        let rb = Roundabout::build(layout()).unwrap();
        let route = rb.route(1, 3);
        for k in 0..200 {
            let s = route.length() * k as f64 / 199.0;
            let p = route.point_at(s);
            let (_, d) = route.project(p, s, 1.0, 1.0);
            assert!(d < 1e-9);
        }
    }

    #[test]
    fn ring_curvature_is_inverse_radius() {
        let rb = Roundabout::build(layout()).unwrap();
        for k in 0..10 {
            let c = rb.ring.curvature_at(k as f64 * 7.3);
            assert!((c - 1.0 / 20.0).abs() < 1e-3, "{c}");
        }
    }

    #[test]
    fn closed_projection_wraps() {
        let rb = Roundabout::build(layout()).unwrap();
        let len = rb.ring.length();
        let p = rb.ring.point_at(1.0);
        let (s, d) = rb.ring.project(p, len - 0.5, 2.0, 3.0);
        assert!(d < 1e-6);
        assert!((s - (len + 1.0)).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_routes() {
        assert!(RouteGeometry::new(vec![[0.0, 0.0]], false).is_err());
        assert!(RouteGeometry::new(vec![[0.0, 0.0], [0.0, 0.0]], false).is_err());
        let mut p = layout();
        p.ring_radius = -1.0;
        assert!(Roundabout::build(p).is_err());
    }

    #[test]
    fn normalize_angle_range() {
        assert_eq!(normalize_angle(PI), PI);
        assert!((normalize_angle(-PI) - PI).abs() < 1e-15);
        assert!((normalize_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
    }
}
