//! Scalar linear-Gaussian state-space model used to check the particle
//! filter and iterated filtering against exact Kalman likelihoods.
//!
//! ```text
//! x_0 ~ N(0, σ_x² / (1 - φ²))
//! x_t = φ x_{t-1} + σ_x η_t
//! y_t = x_t + σ_y ε_t
//! ```
//!
//! Parameter vector: `(phi, sigma_x, sigma_y)`.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};

#[allow(unused_imports)]
use crate::fmath::*;
use crate::model::Pomp;
use crate::rng::{Channel, RngStreamKey};
use crate::special::normal_logpdf;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default)]
pub struct LinearGaussian;

impl LinearGaussian {
    pub fn stationary_var(theta: &[f64]) -> f64 {
        theta[1] * theta[1] / (1.0 - theta[0] * theta[0])
    }

    /// Simulate `n` observations.
    pub fn simulate(&self, theta: &[f64], n: usize, seed: u64) -> Vec<f64> {
        let key = RngStreamKey::new(seed);
        let mut x = self.initial_state(theta, key);
        (0..n)
            .map(|t| {
                self.advance(&mut x, theta, t, key);
                self.measurement_draw(&x, theta, key.time(t as u64))
            })
            .collect()
    }
}

fn normal(key: RngStreamKey) -> f64 {
    StandardNormal.sample(&mut key.stream())
}

impl Pomp for LinearGaussian {
    type State = f64;

    fn param_names(&self) -> Vec<String> {
        ["phi", "sigma_x", "sigma_y"].iter().map(|s| s.to_string()).collect()
    }

    fn to_estimation(&self, natural: &[f64]) -> Result<Vec<f64>> {
        if !(natural[0].abs() < 1.0) {
            return Err(Error::InvalidParameter { name: "phi", value: natural[0] });
        }
        for (name, v) in [("sigma_x", natural[1]), ("sigma_y", natural[2])] {
            if !(v > 0.0) {
                return Err(Error::NonPositiveParameter { name, value: v });
            }
        }
        Ok(alloc::vec![natural[0].atanh(), natural[1].ln(), natural[2].ln()])
    }

    fn to_natural(&self, est: &[f64]) -> Vec<f64> {
        alloc::vec![est[0].tanh(), est[1].exp(), est[2].exp()]
    }

    fn initial_state(&self, theta: &[f64], key: RngStreamKey) -> f64 {
        Self::stationary_var(theta).sqrt() * normal(key.channel(Channel::Initial))
    }

    fn advance(&self, state: &mut f64, theta: &[f64], obs_index: usize, key: RngStreamKey) {
        let z = normal(key.time(obs_index as u64).channel(Channel::RecruitmentGamma));
        *state = theta[0] * *state + theta[1] * z;
    }

    fn measurement_logpdf(&self, y: f64, state: &f64, theta: &[f64]) -> f64 {
        normal_logpdf(y, *state, theta[2] * theta[2])
    }

    fn measurement_draw(&self, state: &f64, theta: &[f64], key: RngStreamKey) -> f64 {
        state + theta[2] * normal(key.channel(Channel::Measurement))
    }

    fn observed_quantity(&self, state: &f64) -> f64 {
        *state
    }
}

/// Exact log-likelihood by the Kalman filter.
pub fn kalman_loglik(theta: &[f64], ys: &[f64]) -> f64 {
    let (phi, q, r) = (theta[0], theta[1] * theta[1], theta[2] * theta[2]);
    let mut mean = 0.0;
    let mut var = LinearGaussian::stationary_var(theta);
    let mut ll = 0.0;
    for &y in ys {
        let pred_mean = phi * mean;
        let pred_var = phi * phi * var + q;
        let f = pred_var + r;
        ll += normal_logpdf(y, pred_mean, f);
        let gain = pred_var / f;
        mean = pred_mean + gain * (y - pred_mean);
        var = (1.0 - gain) * pred_var;
    }
    ll
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kalman_matches_dense_gaussian() {
        // y ~ N(0, Σ) with Σ_ij = v φ^|i-j| + r δ_ij; dense log-density via Cholesky.
        let theta = [0.6, 0.8, 0.5];
        let ys = [0.3, -1.2, 0.4, 2.0, 1.1, -0.7];
        let n = ys.len();
        let v = LinearGaussian::stationary_var(&theta);
        let mut s = alloc::vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                s[i * n + j] = v * theta[0].powi((i as i32 - j as i32).abs());
                if i == j {
                    s[i * n + j] += theta[2] * theta[2];
                }
            }
        }
        let mut l = alloc::vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = s[i * n + j];
                for k in 0..j {
                    sum -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = if i == j { sum.sqrt() } else { sum / l[j * n + j] };
            }
        }
        let mut z = alloc::vec![0.0; n];
        for i in 0..n {
            let mut sum = ys[i];
            for k in 0..i {
                sum -= l[i * n + k] * z[k];
            }
            z[i] = sum / l[i * n + i];
        }
        let logdet: f64 = (0..n).map(|i| 2.0 * l[i * n + i].ln()).sum();
        let quad: f64 = z.iter().map(|x| x * x).sum();
        let dense = -0.5 * (n as f64 * crate::special::LN_2PI + logdet + quad);
        assert!((kalman_loglik(&theta, &ys) - dense).abs() < 1e-10);
    }

    #[test]
    fn transforms_round_trip() {
        let m = LinearGaussian;
        let theta = [0.7, 1.0, 0.5];
        let back = m.to_natural(&m.to_estimation(&theta).unwrap());
        for (a, b) in back.iter().zip(theta) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(m.to_estimation(&[1.2, 1.0, 1.0]).is_err());
    }
}
