use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_LEARNING_RATE: f64 = 3e-4;
pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First/second moment accumulators for one parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub learning_rate: f64,
}

impl AdamState {
    pub fn new(len: usize, learning_rate: f64) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
            learning_rate,
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
///
/// Returns `Ok(false)` and leaves both `params` and `state` untouched when any
/// gradient entry is non-finite.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState) -> Result<bool> {
    if params.len() != grads.len() || params.len() != state.m.len() || state.v.len() != state.m.len() {
        return Err(Error::Config(format!(
            "adam shape mismatch: params {}, grads {}, moments {}",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Ok(false);
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);
    let lr = state.learning_rate;
    for ((p, &g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![1.0, -2.0, 3.0];
        let mut s = AdamState::new(3, 0.1);
        assert!(adam_step(&mut p, &[0.0; 3], &mut s).unwrap());
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate_times_sign() {
        let mut p = vec![0.0; 4];
        let g = [0.5, -3.0, 1e-3, -1e3];
        let mut s = AdamState::new(4, 1e-2);
        adam_step(&mut p, &g, &mut s).unwrap();
        for (pi, gi) in p.iter().zip(g) {
            assert!((pi + 1e-2 * gi.signum()).abs() < 1e-7, "{pi} vs {gi}");
        }
    }

    #[test]
    fn non_finite_gradient_is_skipped() {
        let mut p = vec![1.0, 2.0];
        let mut s = AdamState::new(2, 0.1);
        assert!(!adam_step(&mut p, &[f64::NAN, 0.0], &mut s).unwrap());
        assert_eq!(p, vec![1.0, 2.0]);
        assert_eq!(s.step, 0);
    }

    #[test]
    fn shape_mismatch_is_config_error() {
        let mut p = vec![1.0, 2.0];
        let mut s = AdamState::new(3, 0.1);
        assert!(adam_step(&mut p, &[0.0, 0.0], &mut s).is_err());
    }

    #[test]
    fn repeated_calls_are_bit_identical() {
        let p0 = vec![0.3, -0.7];
        let g = [0.11, -0.25];
        let mut s0 = AdamState::new(2, 3e-4);
        let mut warm = p0.clone();
        for _ in 0..5 {
            adam_step(&mut warm, &g, &mut s0).unwrap();
        }
        let (mut a, mut sa) = (warm.clone(), s0.clone());
        let (mut b, mut sb) = (warm.clone(), s0.clone());
        adam_step(&mut a, &g, &mut sa).unwrap();
        adam_step(&mut b, &g, &mut sb).unwrap();
        assert_eq!(a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        assert_eq!(sa, sb);
    }

    /// Independent scalar recursion for Adam on (x - 5)^2.
    fn scalar_adam_oracle(steps: usize, lr: f64) -> f64 {
        let (mut x, mut m, mut v) = (0.0f64, 0.0f64, 0.0f64);
        for t in 1..=steps {
            let g = 2.0 * (x - 5.0);
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t as i32));
            let vh = v / (1.0 - 0.999f64.powi(t as i32));
            x -= lr * mh / (vh.sqrt() + 1e-8);
        }
        x
    }

    #[test]
    fn quadratic_converges() {
        let mut x = vec![0.0];
        let mut s = AdamState::new(1, 0.1);
        for _ in 0..200 {
            let g = [2.0 * (x[0] - 5.0)];
            adam_step(&mut x, &g, &mut s).unwrap();
        }
        let oracle = scalar_adam_oracle(200, 0.1);
        assert!((x[0] - oracle).abs() < 1e-12);
        assert!((x[0] - 5.0).abs() < 0.1, "x = {}", x[0]);
    }
}
