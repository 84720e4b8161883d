//! Log-ARMA benchmark: exact Gaussian likelihood of `z_k = ln y_k` under a
//! stationary, invertible ARMA(p, q), and its maximization.
//!
//! The likelihood is computed by the Kalman filter on the state-space form
//!
//! ```text
//! z_t - μ = [1 0 … 0] α_t
//! α_{t+1} = T α_t + R ε_{t+1},   ε ~ N(0, σ²)
//! ```
//!
//! with `r = max(p, q + 1)`, `T` holding the AR coefficients in its first
//! column and ones on the superdiagonal, and `R = (1, θ_1, …, θ_{r-1})`. The
//! initial state covariance solves the discrete Lyapunov equation.
//!
//! Fitting searches an unconstrained space: AR and MA blocks through their
//! partial autocorrelations (`tanh`), the mean directly, and the innovation
//! variance concentrated out.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[allow(unused_imports)]
use crate::fmath::*;
use crate::model::{aic, FitResult};
use crate::optim::NelderMead;
use crate::rng::RngStreamKey;
use crate::special::LN_2PI;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmaParams {
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub intercept: f64,
    pub var: f64,
}

impl ArmaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.var > 0.0) || !self.var.is_finite() {
            return Err(Error::NonPositiveParameter { name: "var", value: self.var });
        }
        if !self.intercept.is_finite() {
            return Err(Error::InvalidParameter { name: "intercept", value: self.intercept });
        }
        if ar_to_partials(&self.ar).is_none() {
            return Err(Error::NonStationary);
        }
        let neg: Vec<f64> = self.ma.iter().map(|t| -t).collect();
        if ar_to_partials(&neg).is_none() {
            return Err(Error::NonInvertible);
        }
        Ok(())
    }
}

/// Partial autocorrelations `r_1..r_p` → AR coefficients (Durbin–Levinson).
/// `|r_k| < 1` for all `k` yields a stationary polynomial.
pub fn partials_to_ar(partials: &[f64]) -> Vec<f64> {
    let mut phi: Vec<f64> = Vec::with_capacity(partials.len());
    for (k, &r) in partials.iter().enumerate() {
        let prev = phi.clone();
        for j in 0..k {
            phi[j] = prev[j] - r * prev[k - 1 - j];
        }
        phi.push(r);
    }
    phi
}

/// Inverse of [`partials_to_ar`]; `None` when the polynomial
/// `1 - φ_1 z - … - φ_p z^p` has a root on or inside the unit circle.
pub fn ar_to_partials(ar: &[f64]) -> Option<Vec<f64>> {
    let mut phi = ar.to_vec();
    let mut partials = vec![0.0; ar.len()];
    for k in (0..ar.len()).rev() {
        let r = phi[k];
        if !(r.abs() < 1.0) {
            return None;
        }
        partials[k] = r;
        let denom = 1.0 - r * r;
        let prev = phi.clone();
        for j in 0..k {
            phi[j] = (prev[j] + r * prev[k - 1 - j]) / denom;
        }
        phi.truncate(k);
    }
    Some(partials)
}

/// Solve `A x = b` in place by Gaussian elimination with partial pivoting.
fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> Option<()> {
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))?;
        if a[pivot * n + col].abs() < 1e-14 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        for row in col + 1..n {
            let factor = a[row * n + col] / a[col * n + col];
            if factor != 0.0 {
                for k in col..n {
                    a[row * n + k] -= factor * a[col * n + k];
                }
                b[row] -= factor * b[col];
            }
        }
    }
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row * n + k] * b[k];
        }
        b[row] = s / a[row * n + row];
    }
    Some(())
}

struct StateSpace {
    r: usize,
    t: Vec<f64>,
    rvec: Vec<f64>,
}

impl StateSpace {
    fn new(ar: &[f64], ma: &[f64]) -> Self {
        let r = ar.len().max(ma.len() + 1);
        let mut t = vec![0.0; r * r];
        for (i, &phi) in ar.iter().enumerate() {
            t[i * r] = phi;
        }
        for i in 0..r - 1 {
            t[i * r + i + 1] = 1.0;
        }
        let mut rvec = vec![0.0; r];
        rvec[0] = 1.0;
        rvec[1..=ma.len()].copy_from_slice(ma);
        StateSpace { r, t, rvec }
    }

    /// Stationary covariance for unit innovation variance:
    /// `vec(P) = (I - T⊗T)^{-1} vec(R Rᵀ)`.
    fn initial_cov(&self) -> Option<Vec<f64>> {
        let r = self.r;
        let n = r * r;
        let mut a = vec![0.0; n * n];
        let mut b = vec![0.0; n];
        for i in 0..r {
            for j in 0..r {
                let row = i * r + j;
                b[row] = self.rvec[i] * self.rvec[j];
                for k in 0..r {
                    for l in 0..r {
                        a[row * n + k * r + l] -= self.t[i * r + k] * self.t[j * r + l];
                    }
                }
                a[row * n + row] += 1.0;
            }
        }
        solve_dense(&mut a, &mut b, n)?;
        Some(b)
    }
}

/// Innovations of the Kalman filter at unit innovation variance:
/// `(Σ ln F_t, Σ v_t² / F_t)`.
fn kalman_sums(ar: &[f64], ma: &[f64], centered: &[f64]) -> Option<(f64, f64)> {
    let ss = StateSpace::new(ar, ma);
    let r = ss.r;
    let mut p = ss.initial_cov()?;
    let mut a = vec![0.0; r];
    let rr: Vec<f64> = (0..r * r).map(|idx| ss.rvec[idx / r] * ss.rvec[idx % r]).collect();
    let (mut sum_ln_f, mut sum_v2) = (0.0, 0.0);
    let mut tmp = vec![0.0; r * r];
    for &z in centered {
        // Update with observation z (Z = e_1).
        let f = p[0];
        if !(f > 0.0) || !f.is_finite() {
            return None;
        }
        let v = z - a[0];
        sum_ln_f += f.ln();
        sum_v2 += v * v / f;
        let k: Vec<f64> = (0..r).map(|i| p[i * r] / f).collect();
        for i in 0..r {
            a[i] += k[i] * v;
        }
        // P ← P - K F Kᵀ
        for i in 0..r {
            for j in 0..r {
                p[i * r + j] -= k[i] * k[j] * f;
            }
        }
        // Predict: a ← T a, P ← T P Tᵀ + R Rᵀ.
        let a_new: Vec<f64> = (0..r).map(|i| (0..r).map(|k| ss.t[i * r + k] * a[k]).sum()).collect();
        a = a_new;
        for i in 0..r {
            for j in 0..r {
                tmp[i * r + j] = (0..r).map(|k| ss.t[i * r + k] * p[k * r + j]).sum();
            }
        }
        for i in 0..r {
            for j in 0..r {
                p[i * r + j] = (0..r).map(|k| tmp[i * r + k] * ss.t[j * r + k]).sum::<f64>() + rr[i * r + j];
            }
        }
    }
    Some((sum_ln_f, sum_v2))
}

fn log_counts(counts: &[u64]) -> Result<Vec<f64>> {
    counts
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            if y == 0 {
                Err(Error::ZeroCount { index: i })
            } else {
                Ok((y as f64).ln())
            }
        })
        .collect()
}

/// Exact Gaussian log-likelihood of a real-valued series.
pub fn arma_loglik_series(params: &ArmaParams, z: &[f64]) -> Result<f64> {
    params.validate()?;
    let centered: Vec<f64> = z.iter().map(|v| v - params.intercept).collect();
    let (sum_ln_f, sum_v2) =
        kalman_sums(&params.ar, &params.ma, &centered).ok_or(Error::NonStationary)?;
    let n = z.len() as f64;
    Ok(-0.5 * (n * LN_2PI + n * params.var.ln() + sum_ln_f + sum_v2 / params.var))
}

/// Log-likelihood of the log-transformed counts. With `log_scale_adjust`
/// the Jacobian `-Σ ln y_k` is added so the value is a density for the
/// counts themselves.
pub fn arma_loglik(params: &ArmaParams, counts: &[u64], log_scale_adjust: bool) -> Result<f64> {
    let z = log_counts(counts)?;
    let ll = arma_loglik_series(params, &z)?;
    Ok(if log_scale_adjust { ll - z.iter().sum::<f64>() } else { ll })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmaFitOptions {
    pub restarts: usize,
    pub seed: u64,
    pub log_scale_adjust: bool,
}

impl Default for ArmaFitOptions {
    fn default() -> Self {
        ArmaFitOptions {
            restarts: 20,
            seed: 0,
            log_scale_adjust: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmaFit {
    pub p: usize,
    pub q: usize,
    pub params: ArmaParams,
    pub start: ArmaParams,
    pub start_loglik: f64,
    pub fit: FitResult,
}

/// Yule–Walker AR start via Levinson–Durbin on sample autocovariances, zero
/// MA terms. Returns partial autocorrelations, mean and innovation variance.
fn moments_start(z: &[f64], p: usize) -> (Vec<f64>, f64, f64) {
    let n = z.len() as f64;
    let mean = z.iter().sum::<f64>() / n;
    let acov: Vec<f64> = (0..=p)
        .map(|h| z.iter().zip(&z[h..]).map(|(a, b)| (a - mean) * (b - mean)).sum::<f64>() / n)
        .collect();
    let mut partials = Vec::with_capacity(p);
    let mut phi: Vec<f64> = Vec::new();
    let mut v = acov[0];
    for k in 1..=p {
        let num = acov[k] - phi.iter().enumerate().map(|(j, f)| f * acov[k - 1 - j]).sum::<f64>();
        let r = (num / v).clamp(-0.99, 0.99);
        let prev = phi.clone();
        for j in 0..k - 1 {
            phi[j] = prev[j] - r * prev[k - 2 - j];
        }
        phi.push(r);
        partials.push(r);
        v *= 1.0 - r * r;
    }
    (partials, mean, v.max(1e-12))
}

fn unpack(x: &[f64], p: usize, q: usize) -> (Vec<f64>, Vec<f64>, f64) {
    let ar = partials_to_ar(&x[..p].iter().map(|u| u.tanh()).collect::<Vec<_>>());
    let ma: Vec<f64> = partials_to_ar(&x[p..p + q].iter().map(|u| u.tanh()).collect::<Vec<_>>())
        .iter()
        .map(|v| -v)
        .collect();
    (ar, ma, x[p + q])
}

/// Profile log-likelihood (σ² concentrated out) and the maximizing σ².
fn concentrated(ar: &[f64], ma: &[f64], mean: f64, z: &[f64]) -> Option<(f64, f64)> {
    let centered: Vec<f64> = z.iter().map(|v| v - mean).collect();
    let (sum_ln_f, sum_v2) = kalman_sums(ar, ma, &centered)?;
    let n = z.len() as f64;
    let var = sum_v2 / n;
    if !(var > 0.0) {
        return None;
    }
    Some((-0.5 * (n * LN_2PI + n * var.ln() + n + sum_ln_f), var))
}

/// Maximize the exact log-ARMA(p, q) likelihood of `counts` by Nelder–Mead
/// from a method-of-moments start plus `restarts - 1` jittered copies.
pub fn arma_fit(counts: &[u64], p: usize, q: usize, options: &ArmaFitOptions) -> Result<ArmaFit> {
    let z = log_counts(counts)?;
    arma_fit_series(&z, p, q, options)
}

/// [`arma_fit`] on a real-valued series (no log transform, no Jacobian).
pub fn arma_fit_series(z: &[f64], p: usize, q: usize, options: &ArmaFitOptions) -> Result<ArmaFit> {
    if z.len() < p + q + 2 {
        return Err(Error::InsufficientHistory(format!("{} observations for ARMA({p},{q})", z.len())));
    }
    let jacobian = if options.log_scale_adjust { z.iter().sum::<f64>() } else { 0.0 };
    let (partials, mean, var) = moments_start(z, p);
    let start = ArmaParams {
        ar: partials_to_ar(&partials),
        ma: vec![0.0; q],
        intercept: mean,
        var,
    };
    let start_loglik = arma_loglik_series(&start, z)? - jacobian;

    let mut x0: Vec<f64> = partials.iter().map(|r| r.atanh()).collect();
    x0.extend(core::iter::repeat_n(0.0, q));
    x0.push(mean);
    let sd_z = {
        let n = z.len() as f64;
        (z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt().max(1e-6)
    };
    let objective = |x: &[f64]| -> f64 {
        let (ar, ma, mu) = unpack(x, p, q);
        match concentrated(&ar, &ma, mu, z) {
            Some((ll, _)) => -ll,
            None => f64::INFINITY,
        }
    };
    let nm = NelderMead {
        f_tol: 1e-13,
        initial_step: 0.1,
        max_evals: 40_000,
        ..NelderMead::default()
    };
    let mut best: Option<crate::optim::Minimum> = None;
    let mut total_evals = 0;
    for restart in 0..options.restarts.max(1) {
        let mut rng = RngStreamKey::new(options.seed).particle(restart as u64).stream();
        let x_start: Vec<f64> = if restart == 0 {
            x0.clone()
        } else {
            x0.iter()
                .enumerate()
                .map(|(i, v)| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    if i < p + q {
                        (v + 0.5 * z).clamp(-3.0, 3.0)
                    } else {
                        v + 0.2 * sd_z * (2.0 * rng.random::<f64>() - 1.0)
                    }
                })
                .collect()
        };
        let m = nm.minimize_polished(objective, &x_start, 6);
        total_evals += m.evals;
        if m.f.is_finite() && best.as_ref().is_none_or(|b| m.f < b.f) {
            best = Some(m);
        }
    }
    let best = best.ok_or_else(|| Error::OptimFailed("no restart produced a finite likelihood".to_string()))?;
    let (ar, ma, mu) = unpack(&best.x, p, q);
    let (ll, var) = concentrated(&ar, &ma, mu, z).ok_or_else(|| Error::OptimFailed("optimum is infeasible".into()))?;
    let params = ArmaParams { ar, ma, intercept: mu, var };
    let loglik = ll - jacobian;
    let mut names: Vec<String> = (1..=p).map(|i| format!("ar{i}")).collect();
    names.extend((1..=q).map(|i| format!("ma{i}")));
    names.push("intercept".into());
    names.push("var".into());
    let mut values = params.ar.clone();
    values.extend(&params.ma);
    values.push(params.intercept);
    values.push(params.var);
    let k = p + q + 2;
    Ok(ArmaFit {
        p,
        q,
        start,
        start_loglik,
        fit: FitResult {
            model: "log-arma".into(),
            param_names: names,
            params: values,
            loglik,
            loglik_se: None,
            k,
            aic: aic(loglik, k),
            objective: None,
            converged: best.converged,
            evaluations: total_evals,
        },
        params,
    })
}
