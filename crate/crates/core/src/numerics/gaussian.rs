use std::f64::consts::{LN_2, PI};

use super::softplus;

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// Mean and clamped log standard deviation produced by the policy network.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianHeadOutput {
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
    /// Per-dimension flag: true when the raw log-std was inside the clamp
    /// range, i.e. the clamp passes gradient through.
    pub log_std_active: Vec<bool>,
}

impl GaussianHeadOutput {
    /// Splits a raw network output `[mean.., log_std..]` and clamps log-std.
    pub fn from_raw(raw: &[f64]) -> Self {
        let d = raw.len() / 2;
        let (mean, ls) = raw.split_at(d);
        let log_std_active = ls
            .iter()
            .map(|&l| (LOG_STD_MIN..=LOG_STD_MAX).contains(&l))
            .collect();
        Self {
            mean: mean.to_vec(),
            log_std: ls.iter().map(|l| l.clamp(LOG_STD_MIN, LOG_STD_MAX)).collect(),
            log_std_active,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Reparameterized sample `a = tanh(mean + std * noise)` with its log-density.
#[derive(Debug, Clone, PartialEq)]
pub struct TanhGaussianSample {
    pub action: Vec<f64>,
    pub log_prob: f64,
    pre_tanh: Vec<f64>,
    std: Vec<f64>,
    noise: Vec<f64>,
    log_std_active: Vec<bool>,
}

/// `ln(1 - tanh(x)^2)` evaluated as `2 (ln 2 - x - softplus(-2x))`.
pub fn log_tanh_jacobian(x: f64) -> f64 {
    2.0 * (LN_2 - x - softplus(-2.0 * x))
}

pub fn sample_tanh_gaussian(head: &GaussianHeadOutput, noise: &[f64]) -> TanhGaussianSample {
    assert_eq!(noise.len(), head.dim(), "noise dimension must match the head");
    let half_log_2pi = 0.5 * (2.0 * PI).ln();
    let mut action = Vec::with_capacity(head.dim());
    let mut pre_tanh = Vec::with_capacity(head.dim());
    let mut std = Vec::with_capacity(head.dim());
    let mut log_prob = 0.0;
    for ((&mu, &ls), &xi) in head.mean.iter().zip(&head.log_std).zip(noise) {
        let sigma = ls.exp();
        let u = mu + sigma * xi;
        log_prob += -0.5 * xi * xi - ls - half_log_2pi - log_tanh_jacobian(u);
        action.push(squash(u));
        pre_tanh.push(u);
        std.push(sigma);
    }
    TanhGaussianSample {
        action,
        log_prob,
        pre_tanh,
        std,
        noise: noise.to_vec(),
        log_std_active: head.log_std_active.clone(),
    }
}

/// Mean action of the squashed policy.
pub fn deterministic_action(head: &GaussianHeadOutput) -> Vec<f64> {
    head.mean.iter().map(|&m| squash(m)).collect()
}

/// `tanh` kept strictly inside (-1, 1) so saturated samples stay valid actions.
fn squash(u: f64) -> f64 {
    const EDGE: f64 = 1.0 - 1e-12;
    u.tanh().clamp(-EDGE, EDGE)
}

impl TanhGaussianSample {
    /// Gradient with respect to the raw head output `[mean.., log_std..]`,
    /// given `d loss / d action` and `d loss / d log_prob`.
    pub fn head_gradient(&self, d_action: &[f64], d_log_prob: f64) -> Vec<f64> {
        let d = self.action.len();
        let mut grad = vec![0.0; 2 * d];
        for i in 0..d {
            let t = self.pre_tanh[i].tanh();
            // d log_prob / d u = 2 tanh(u); d a / d u = 1 - tanh(u)^2
            let d_u = d_action[i] * (1.0 - t * t) + d_log_prob * 2.0 * t;
            grad[i] = d_u;
            if self.log_std_active[i] {
                // u depends on log_std through std * noise, and log_prob has a -log_std term
                grad[d + i] = d_u * self.std[i] * self.noise[i] - d_log_prob;
            }
        }
        grad
    }
}

/// Gradient of `sum_i w_i * (tanh(mean_i) - target_i)^2`-style losses with
/// respect to the raw head output, given `d loss / d tanh(mean)`.
pub fn mean_action_head_gradient(head: &GaussianHeadOutput, d_action: &[f64]) -> Vec<f64> {
    let d = head.dim();
    let mut grad = vec![0.0; 2 * d];
    for i in 0..d {
        let t = head.mean[i].tanh();
        grad[i] = d_action[i] * (1.0 - t * t);
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn head(mu: f64, ls: f64) -> GaussianHeadOutput {
        GaussianHeadOutput::from_raw(&[mu, ls])
    }

    #[test]
    fn clamp_is_applied() {
        let h = GaussianHeadOutput::from_raw(&[0.0, 0.0, 5.0, -30.0]);
        assert_eq!(h.log_std, vec![2.0, -20.0]);
        assert_eq!(h.log_std_active, vec![false, false]);
    }

    #[test]
    fn zero_noise_collapses_to_tanh_mean() {
        let h = head(0.7, -20.0);
        let s = sample_tanh_gaussian(&h, &[0.0]);
        assert!((s.action[0] - 0.7f64.tanh()).abs() < 1e-12);
        assert!(s.log_prob > 15.0);
        assert!((deterministic_action(&h)[0] - s.action[0]).abs() < 1e-9);
    }

    #[test]
    fn deterministic_action_cases() {
        assert_eq!(deterministic_action(&head(0.0, 0.0)), vec![0.0]);
        assert!((deterministic_action(&head(50.0, 0.0))[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn stable_jacobian_matches_naive_form() {
        for i in -80..80 {
            let x = i as f64 / 10.0;
            let naive = (1.0 - x.tanh().powi(2)).ln();
            assert!((log_tanh_jacobian(x) - naive).abs() < 1e-8, "x = {x}");
        }
        assert!(log_tanh_jacobian(40.0).is_finite());
    }

    /// Density of a = tanh(u), u ~ N(mu, sigma), by change of variables with the
    /// naive Jacobian, compared against the implementation's log-prob.
    #[test]
    fn log_prob_matches_change_of_variables() {
        let (mu, ls) = (0.3, -0.4);
        let sigma = f64::exp(ls);
        let h = head(mu, ls);
        for k in 0..41 {
            let xi = -3.0 + 0.15 * k as f64;
            let s = sample_tanh_gaussian(&h, &[xi]);
            let a = s.action[0];
            let u = a.atanh();
            let gauss = (-(u - mu).powi(2) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * PI).sqrt());
            let density = gauss / (1.0 - a * a);
            assert!((s.log_prob - density.ln()).abs() < 1e-5, "xi = {xi}");
        }
    }

    /// The squashed density integrates to one over (-1, 1).
    #[test]
    fn log_prob_integrates_to_one() {
        for &(mu, ls) in &[(0.0, 0.0), (0.5, -1.0), (-1.2, 0.5)] {
            let h = head(mu, ls);
            let sigma = f64::exp(ls);
            // integrate over u with density p(a) |da/du| = N(u), using a = tanh(u)
            let n = 20_000;
            let (lo, hi) = (mu - 10.0 * sigma, mu + 10.0 * sigma);
            let du = (hi - lo) / n as f64;
            let mut total = 0.0;
            for i in 0..n {
                let u = lo + (i as f64 + 0.5) * du;
                let xi = (u - mu) / sigma;
                let s = sample_tanh_gaussian(&h, &[xi]);
                let jac = 1.0 - u.tanh().powi(2);
                total += s.log_prob.exp() * jac * du;
            }
            assert!((total - 1.0).abs() < 1e-3, "integral {total}");
        }
    }

    #[test]
    fn monte_carlo_mean_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = head(0.0, 0.0);
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|_| {
                let xi: f64 = StandardNormal.sample(&mut rng);
                sample_tanh_gaussian(&h, &[xi]).action[0]
            })
            .sum::<f64>()
            / n as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn actions_stay_inside_open_interval() {
        let h = head(30.0, 2.0);
        for xi in [-5.0, 0.0, 5.0] {
            let a = sample_tanh_gaussian(&h, &[xi]).action[0];
            assert!(a > -1.0 && a < 1.0);
        }
    }

    #[test]
    fn head_gradient_matches_finite_differences() {
        let raw = [0.4, -0.3];
        let xi = [0.8];
        let (wa, wl) = (1.7, -0.6);
        let f = |r: &[f64]| {
            let s = sample_tanh_gaussian(&GaussianHeadOutput::from_raw(r), &xi);
            wa * s.action[0] + wl * s.log_prob
        };
        let s = sample_tanh_gaussian(&GaussianHeadOutput::from_raw(&raw), &xi);
        let g = s.head_gradient(&[wa], wl);
        for i in 0..2 {
            let mut p = raw;
            let mut m = raw;
            p[i] += 1e-5;
            m[i] -= 1e-5;
            let fd = (f(&p) - f(&m)) / 2e-5;
            assert!((fd - g[i]).abs() < 1e-7, "{i}: {fd} vs {}", g[i]);
        }
    }
}
