//! Shared parameter, state and trajectory types, the gamma random effect, and
//! the [`Pomp`] trait consumed by the particle filter and iterated filtering.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

#[allow(unused_imports)]
use crate::fmath::*;
use crate::rng::RngStreamKey;
use crate::{Error, Result};

/// Days between consecutive observations.
pub const OBSERVATION_INTERVAL: u32 = 2;

/// Names of the six estimated blowfly parameters, in vector order.
pub const BLOWFLY_PARAM_NAMES: [&str; 6] = ["P", "N0", "delta_rate", "sigma_p", "sigma_d", "sigma_y"];

/// Smallest accepted measurement overdispersion.
pub const SIGMA_Y_MIN: f64 = 1e-8;

/// Parameters of the stochastic blowfly model. Rates are per day, noise
/// scales per square-root day; `delta` and `tau` are whole days.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowflyParams {
    #[serde(rename = "P")]
    pub p: f64,
    #[serde(rename = "N0")]
    pub n0: f64,
    pub delta_rate: f64,
    pub sigma_p: f64,
    pub sigma_d: f64,
    pub sigma_y: f64,
    /// Euler step in days.
    pub delta: u32,
    /// Maturation delay in days.
    pub tau: u32,
}

impl BlowflyParams {
    /// The published maximum-likelihood estimate for a one-day step.
    pub const fn published_mle() -> Self {
        BlowflyParams {
            p: 3.28,
            n0: 680.0,
            delta_rate: 0.161,
            sigma_p: 1.35,
            sigma_d: 0.747,
            sigma_y: 0.0266,
            delta: 1,
            tau: 14,
        }
    }

    pub fn estimated(&self) -> [f64; 6] {
        [self.p, self.n0, self.delta_rate, self.sigma_p, self.sigma_d, self.sigma_y]
    }

    pub fn with_estimated(&self, v: &[f64]) -> Self {
        BlowflyParams {
            p: v[0],
            n0: v[1],
            delta_rate: v[2],
            sigma_p: v[3],
            sigma_d: v[4],
            sigma_y: v[5],
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in BLOWFLY_PARAM_NAMES.iter().zip(self.estimated()) {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::NonPositiveParameter { name, value });
            }
        }
        if self.sigma_y < SIGMA_Y_MIN {
            return Err(Error::InvalidSigma(self.sigma_y));
        }
        check_step(self.delta, self.tau)
    }

    /// Log-transform the six estimated parameters.
    pub fn to_estimation_scale(&self) -> Result<[f64; 6]> {
        let mut out = [0.0; 6];
        for ((o, name), value) in out.iter_mut().zip(BLOWFLY_PARAM_NAMES).zip(self.estimated()) {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::NonPositiveParameter { name, value });
            }
            *o = value.ln();
        }
        Ok(out)
    }

    /// Inverse of [`to_estimation_scale`](Self::to_estimation_scale);
    /// `delta` and `tau` come from `structure`.
    pub fn from_estimation_scale(est: &[f64], structure: &BlowflyParams) -> Self {
        let mut natural = [0.0; 6];
        for (n, e) in natural.iter_mut().zip(est) {
            *n = e.exp();
        }
        structure.with_estimated(&natural)
    }

    /// Number of Euler steps per observation interval.
    pub fn steps_per_observation(&self) -> u32 {
        OBSERVATION_INTERVAL / self.delta
    }

    /// Length of the delay buffer, `tau / delta + 1`.
    pub fn buffer_len(&self) -> usize {
        (self.tau / self.delta) as usize + 1
    }
}

pub(crate) fn check_step(delta: u32, tau: u32) -> Result<()> {
    if delta == 0 {
        return Err(Error::NonPositiveParameter { name: "delta", value: 0.0 });
    }
    if !tau.is_multiple_of(delta) {
        return Err(Error::IndivisibleLag { delta, span: tau, what: "tau" });
    }
    if !OBSERVATION_INTERVAL.is_multiple_of(delta) {
        return Err(Error::IndivisibleLag {
            delta,
            span: OBSERVATION_INTERVAL,
            what: "the observation interval",
        });
    }
    Ok(())
}

/// Fixed-length ring buffer holding `(N(t), N(t-Δ), ..., N(t-τ))`.
#[derive(Clone, Debug, PartialEq)]
pub struct DelayBuffer<T> {
    values: Vec<T>,
    head: usize,
}

impl<T: Copy> DelayBuffer<T> {
    /// Build from the logical layout, newest first.
    pub fn from_newest_first(values: &[T]) -> Self {
        assert!(!values.is_empty(), "delay buffer needs at least one slot");
        let mut stored: Vec<T> = values.to_vec();
        stored.reverse();
        DelayBuffer {
            head: stored.len() - 1,
            values: stored,
        }
    }

    pub fn filled(value: T, len: usize) -> Self {
        DelayBuffer::from_newest_first(&vec![value; len])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `N(t - lag·Δ)`.
    #[inline]
    pub fn get(&self, lag: usize) -> T {
        let n = self.values.len();
        self.values[(self.head + n - lag) % n]
    }

    /// `N(t)`.
    #[inline]
    pub fn current(&self) -> T {
        self.values[self.head]
    }

    /// `N(t - τ)`, the oldest slot.
    #[inline]
    pub fn oldest(&self) -> T {
        self.get(self.values.len() - 1)
    }

    /// Shift by one step: `next` becomes `N(t)`, the oldest value is dropped.
    #[inline]
    pub fn push(&mut self, next: T) {
        self.head = (self.head + 1) % self.values.len();
        self.values[self.head] = next;
    }

    pub fn newest_first(&self) -> Vec<T> {
        (0..self.values.len()).map(|lag| self.get(lag)).collect()
    }
}

/// The Markov state `X(t)`: a delay buffer plus its day-stamp.
#[derive(Clone, Debug, PartialEq)]
pub struct DelayState<T = u64> {
    pub buffer: DelayBuffer<T>,
    pub time: u32,
}

impl<T: Copy> DelayState<T> {
    pub fn new(newest_first: &[T], time: u32) -> Self {
        DelayState {
            buffer: DelayBuffer::from_newest_first(newest_first),
            time,
        }
    }

    pub fn current(&self) -> T {
        self.buffer.current()
    }

    pub fn lagged(&self) -> T {
        self.buffer.oldest()
    }
}

impl DelayState<u64> {
    pub fn to_real(&self) -> DelayState<f64> {
        DelayState {
            buffer: DelayBuffer {
                values: self.buffer.values.iter().map(|&v| v as f64).collect(),
                head: self.buffer.head,
            },
            time: self.time,
        }
    }
}

/// A simulated sample path, one entry per process step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<u32>,
    pub states: Vec<f64>,
    /// Simulated counts at observation days, `None` elsewhere.
    pub observations: Option<Vec<Option<u64>>>,
}

/// Multiplicative gamma random effect with mean 1 and variance `sigma²/delta`
/// (shape `delta/sigma²`, scale `sigma²/delta`).
pub fn gamma_effect(key: RngStreamKey, sigma: f64, delta: f64) -> f64 {
    if sigma < 1e-8 {
        return 1.0;
    }
    let s2 = sigma * sigma;
    match Gamma::new(delta / s2, s2 / delta) {
        Ok(g) => g.sample(&mut key.stream()),
        Err(_) => 1.0,
    }
}

/// A partially observed Markov process as seen by the filters: everything is
/// reached through simulation of the state, evaluation of the measurement
/// density and parameter transforms.
///
/// Parameter vectors are on the natural scale unless a method says otherwise.
pub trait Pomp: Sync {
    type State: Clone + Send + Sync;

    fn param_names(&self) -> Vec<String>;

    fn to_estimation(&self, natural: &[f64]) -> Result<Vec<f64>>;

    fn to_natural(&self, estimation: &[f64]) -> Vec<f64>;

    /// State at the time of the last unfitted observation.
    fn initial_state(&self, theta: &[f64], key: RngStreamKey) -> Self::State;

    /// Advance `state` to the time of observation `obs_index` (0-based within
    /// the fitted window). `key` carries seed, iteration and particle; the
    /// model chooses time indices and channels.
    fn advance(&self, state: &mut Self::State, theta: &[f64], obs_index: usize, key: RngStreamKey);

    fn measurement_logpdf(&self, y: f64, state: &Self::State, theta: &[f64]) -> f64;

    fn measurement_draw(&self, state: &Self::State, theta: &[f64], key: RngStreamKey) -> f64;

    /// Scalar summary reported as the filter mean.
    fn observed_quantity(&self, state: &Self::State) -> f64;
}

/// Uniform result record for POMP, ARMA and NLAR fits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: String,
    pub param_names: Vec<String>,
    pub params: Vec<f64>,
    pub loglik: f64,
    pub loglik_se: Option<f64>,
    /// Number of estimated parameters counted by AIC.
    pub k: usize,
    pub aic: f64,
    /// Criterion value minimized, when the fit was not likelihood-based.
    pub objective: Option<f64>,
    pub converged: bool,
    pub evaluations: usize,
}

pub fn aic(loglik: f64, k: usize) -> f64 {
    -2.0 * loglik + 2.0 * k as f64
}
