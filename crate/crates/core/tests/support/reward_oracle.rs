//! Independent transcription of the four-term driving reward, written from
//! the formulas without reference to the crate's implementation.

pub struct Constants {
    pub v_max: f64,
    pub v_min: f64,
    pub r1: f64,
    pub r2: f64,
    pub lambda: f64,
}

pub const DEFAULT: Constants = Constants {
    v_max: 12.0,
    v_min: 0.1,
    r1: 10.0,
    r2: 20.0,
    lambda: 0.8,
};

fn ind(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Returns (r_v, r_step, r_col, r_safe).
pub fn terms(c: &Constants, v: f64, d1: Option<f64>, d2: Option<f64>, a: f64, collided: bool) -> (f64, f64, f64, f64) {
    let r_v = v + 2.0 * (c.v_max - v) * ind(v >= c.v_max);
    let r_step = -0.1;
    let r_col = -10.0 * ind(collided);
    let v_safe = v * (1.0 - ind(v <= c.v_min && a < 0.0));
    let z1 = d1.map_or(0.0, |d| c.lambda * (c.r1 - d) / c.r1);
    let z2 = d2.map_or(0.0, |d| (1.0 - c.lambda) * (c.r2 - d) / c.r2);
    let r_safe = -(z1 + z2) * v_safe;
    (r_v, r_step, r_col, r_safe)
}
