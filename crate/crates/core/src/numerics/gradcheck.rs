//! Central finite-difference checks for hand-written gradients.
//!
//! ReLU kinks make a finite difference meaningless when a perturbation flips
//! an activation. Each coordinate is probed at `h` and `h/2`; when the two
//! estimates disagree beyond smooth-function truncation error the coordinate
//! is reported as a kink and left out of the error statistic.

/// Outcome of comparing an analytic gradient against finite differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// Coordinate with the largest error.
    pub worst: Option<usize>,
    pub checked: usize,
    pub kinks: usize,
}

impl GradCheck {
    /// One hidden unit sitting at its kink spoils the difference for every
    /// weight upstream of it, so up to a tenth of the coordinates may be kinks.
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error < tol && self.kinks * 10 <= self.checked.max(1)
    }
}

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares `analytic` against central differences of `loss` around `x`.
///
/// `loss` is evaluated on a scratch copy of `x`; `x` itself is unchanged.
pub fn check_gradient<F>(x: &[f64], analytic: &[f64], h: f64, mut loss: F) -> GradCheck
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(x.len(), analytic.len());
    let mut probe = x.to_vec();
    let mut central = |i: usize, step: f64, probe: &mut Vec<f64>| {
        probe[i] = x[i] + step;
        let up = loss(probe);
        probe[i] = x[i] - step;
        let down = loss(probe);
        probe[i] = x[i];
        (up - down) / (2.0 * step)
    };
    let mut out = GradCheck {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
        kinks: 0,
    };
    for i in 0..x.len() {
        let n1 = central(i, h, &mut probe);
        let n2 = central(i, 0.5 * h, &mut probe);
        let scale = n1.abs().max(n2.abs()).max(1e-6);
        if (n1 - n2).abs() > 1e-5 * scale {
            out.kinks += 1;
            continue;
        }
        out.checked += 1;
        let err = relative_error(analytic[i], n2, 1e-6);
        if err > out.max_rel_error {
            out.max_rel_error = err;
            out.worst = Some(i);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_function_passes() {
        let x: [f64; 3] = [0.3, -1.2, 2.0];
        let f = |v: &[f64]| v[0] * v[0] * v[1] + v[2].sin();
        let g = [2.0 * x[0] * x[1], x[0] * x[0], x[2].cos()];
        let c = check_gradient(&x, &g, 1e-4, f);
        assert_eq!(c.kinks, 0);
        assert!(c.passes(1e-6), "{c:?}");
    }

    #[test]
    fn wrong_gradient_fails() {
        let x = [1.0];
        let c = check_gradient(&x, &[3.0], 1e-4, |v| v[0] * v[0]);
        assert!(!c.passes(1e-4));
    }

    #[test]
    fn kink_is_skipped() {
        let x = [1e-5];
        let c = check_gradient(&x, &[123.0], 1e-4, |v| v[0].max(0.0));
        assert_eq!(c.kinks, 1);
        assert_eq!(c.checked, 0);
    }
}
