use super::geometry::{normalize_angle, Point, RouteId};

/// Kinematic state of one vehicle. `x, y` is the geometric center.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    /// Radians in (-pi, pi].
    pub heading: f64,
    /// Never negative.
    pub speed: f64,
    pub route: RouteId,
    /// Arc length along `route` of the vehicle's center.
    pub progress: f64,
    pub length: f64,
    pub width: f64,
}

impl VehicleState {
    pub fn position(&self) -> Point {
        [self.x, self.y]
    }

    pub fn direction(&self) -> Point {
        [self.heading.cos(), self.heading.sin()]
    }

    /// Midpoint of the front bumper.
    pub fn front(&self) -> Point {
        let [c, s] = self.direction();
        let h = 0.5 * self.length;
        [self.x + h * c, self.y + h * s]
    }

    /// Rear-axle point, used as the pure-pursuit reference.
    pub fn rear_axle(&self, wheelbase: f64) -> Point {
        let [c, s] = self.direction();
        let h = 0.5 * wheelbase;
        [self.x - h * c, self.y - h * s]
    }

    /// Advances one explicit-Euler step of the kinematic bicycle model about
    /// the rear axle. Speed is clamped at zero so braking never reverses.
    pub fn integrate_bicycle(&mut self, accel: f64, steering: f64, wheelbase: f64, dt: f64) {
        let [rx, ry] = self.rear_axle(wheelbase);
        let v = self.speed;
        let rx = rx + v * self.heading.cos() * dt;
        let ry = ry + v * self.heading.sin() * dt;
        self.heading = normalize_angle(self.heading + v / wheelbase * steering.tan() * dt);
        let h = 0.5 * wheelbase;
        self.x = rx + h * self.heading.cos();
        self.y = ry + h * self.heading.sin();
        self.speed = (v + accel * dt).max(0.0);
    }

    pub fn obb(&self) -> OrientedBox {
        OrientedBox {
            center: self.position(),
            heading: self.heading,
            half_length: 0.5 * self.length,
            half_width: 0.5 * self.width,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox {
    pub center: Point,
    pub heading: f64,
    pub half_length: f64,
    pub half_width: f64,
}

impl OrientedBox {
    fn axes(&self) -> [Point; 2] {
        let (s, c) = self.heading.sin_cos();
        [[c, s], [-s, c]]
    }

    /// Corners in counter-clockwise order.
    pub fn corners(&self) -> [Point; 4] {
        let [u, v] = self.axes();
        let (l, w) = (self.half_length, self.half_width);
        let [cx, cy] = self.center;
        [
            [cx + l * u[0] - w * v[0], cy + l * u[1] - w * v[1]],
            [cx + l * u[0] + w * v[0], cy + l * u[1] + w * v[1]],
            [cx - l * u[0] + w * v[0], cy - l * u[1] + w * v[1]],
            [cx - l * u[0] - w * v[0], cy - l * u[1] - w * v[1]],
        ]
    }

    /// Separating-axis test on the four face normals of the two boxes.
    pub fn overlaps(&self, other: &OrientedBox) -> bool {
        let d = [other.center[0] - self.center[0], other.center[1] - self.center[1]];
        let bound = self.half_length + self.half_width + other.half_length + other.half_width;
        if d[0] * d[0] + d[1] * d[1] > bound * bound {
            return false;
        }
        let a = self.axes();
        let b = other.axes();
        for axis in a.iter().chain(b.iter()) {
            let ra = radius_along(self, &a, *axis);
            let rb = radius_along(other, &b, *axis);
            if (d[0] * axis[0] + d[1] * axis[1]).abs() > ra + rb {
                return false;
            }
        }
        true
    }
}

fn radius_along(b: &OrientedBox, axes: &[Point; 2], axis: Point) -> f64 {
    b.half_length * (axes[0][0] * axis[0] + axes[0][1] * axis[1]).abs()
        + b.half_width * (axes[1][0] * axis[0] + axes[1][1] * axis[1]).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn car(x: f64, y: f64, heading: f64) -> VehicleState {
        VehicleState {
            x,
            y,
            heading,
            speed: 0.0,
            route: RouteId::Ring,
            progress: 0.0,
            length: 4.5,
            width: 1.9,
        }
    }

    #[test]
    fn far_apart_and_identical() {
        assert!(!car(0.0, 0.0, 0.0).obb().overlaps(&car(1000.0, 0.0, 0.0).obb()));
        assert!(car(3.0, 4.0, 0.3).obb().overlaps(&car(3.0, 4.0, 0.3).obb()));
    }

    #[test]
    fn bumper_to_bumper() {
        let a = car(0.0, 0.0, 0.0).obb();
        assert!(a.overlaps(&car(4.49, 0.0, 0.0).obb()));
        assert!(!a.overlaps(&car(4.51, 0.0, 0.0).obb()));
        // side by side
        assert!(!a.overlaps(&car(0.0, 1.91, 0.0).obb()));
        assert!(a.overlaps(&car(0.0, 1.89, 0.0).obb()));
    }

    #[test]
    fn braking_never_reverses() {
        let mut v = car(0.0, 0.0, 0.0);
        v.speed = 5.0;
        v.integrate_bicycle(-6.0, 0.0, 2.85, 0.1);
        assert!((v.speed - 4.4).abs() < 1e-12);
        for _ in 0..20 {
            v.integrate_bicycle(-6.0, 0.0, 2.85, 0.1);
        }
        assert_eq!(v.speed, 0.0);
    }

    #[test]
    fn straight_line_motion() {
        let mut v = car(0.0, 0.0, 0.0);
        v.speed = 10.0;
        v.integrate_bicycle(0.0, 0.0, 2.85, 0.1);
        assert!((v.x - 1.0).abs() < 1e-12 && v.y.abs() < 1e-12);
    }
}
