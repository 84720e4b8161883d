//! The stochastic blowfly process, its negative binomial measurement model,
//! and the deterministic skeletons of this model and of the Xia–Tong
//! nonlinear autoregression.
//!
//! One Euler step of length `Δ` days:
//!
//! ```text
//! R ~ Poisson(N(t-τ) · P · exp(-N(t-τ)/N0) · Δ · e)
//! S ~ Binomial(N(t), exp(-δ · Δ · ε))
//! N(t+Δ) = R + S
//! ```
//!
//! where `e` and `ε` are independent gamma effects with mean one and
//! variances `σ_p²/Δ` and `σ_d²/Δ`.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Binomial, Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};

#[allow(unused_imports)]
use crate::fmath::*;
use crate::model::{gamma_effect, BlowflyParams, DelayState, Pomp, Trajectory, BLOWFLY_PARAM_NAMES, OBSERVATION_INTERVAL, SIGMA_Y_MIN};
use crate::rng::{Channel, RngStreamKey};
use crate::special::negbin_logpmf;
use crate::{Error, Result};

/// Recruits and survivors of one Euler step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepOutcome {
    pub recruits: u64,
    pub survivors: u64,
    pub next_n: u64,
}

/// Parameters of the Xia–Tong skeleton on the bi-daily grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct XTParams {
    pub c: f64,
    pub alpha: f64,
    #[serde(rename = "N0_xt")]
    pub n0_xt: f64,
    pub nu: f64,
    /// Lag in days; 14 means seven bi-daily steps.
    pub tau: u32,
    /// Gaussian innovation variance; `None` means profile it out.
    #[serde(default)]
    pub sigma2: Option<f64>,
}

impl XTParams {
    pub fn validate(&self) -> Result<()> {
        let check = |name, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::NonPositiveParameter { name, value: v })
            }
        };
        check("c", self.c)?;
        check("alpha", self.alpha)?;
        check("N0_xt", self.n0_xt)?;
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return Err(Error::InvalidParameter { name: "nu", value: self.nu });
        }
        if let Some(s2) = self.sigma2 {
            if !(s2 >= 0.0) {
                return Err(Error::InvalidParameter { name: "sigma2", value: s2 });
            }
        }
        if self.tau == 0 || !self.tau.is_multiple_of(OBSERVATION_INTERVAL) {
            return Err(Error::IndivisibleLag {
                delta: OBSERVATION_INTERVAL,
                span: self.tau,
                what: "tau",
            });
        }
        Ok(())
    }

    /// Lag in bi-daily steps.
    pub fn lag_steps(&self) -> usize {
        (self.tau / OBSERVATION_INTERVAL) as usize
    }
}

fn poisson_draw(mean: f64, key: RngStreamKey) -> u64 {
    if !(mean > 0.0) {
        return 0;
    }
    let mean = mean.min(Poisson::<f64>::MAX_LAMBDA);
    match Poisson::new(mean) {
        Ok(d) => {
            let v: f64 = d.sample(&mut key.stream());
            v as u64
        }
        Err(_) => 0,
    }
}

fn binomial_draw(n: u64, p: f64, key: RngStreamKey) -> u64 {
    if n == 0 || !(p > 0.0) {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    match Binomial::new(n, p) {
        Ok(d) => d.sample(&mut key.stream()),
        Err(_) => 0,
    }
}

/// Mean of the Poisson recruitment given the lagged count, before the gamma
/// effect is applied.
pub fn recruitment_mean(lagged: f64, params: &BlowflyParams) -> f64 {
    lagged * params.p * (-lagged / params.n0).exp() * params.delta as f64
}

/// Draw one Euler step. `key` fixes seed, iteration, time and particle; the
/// four draws use the recruitment/survival channels. The caller shifts the
/// buffer.
pub fn process_step(state: &DelayState, params: &BlowflyParams, key: RngStreamKey) -> StepOutcome {
    let dt = params.delta as f64;
    let e = gamma_effect(key.channel(Channel::RecruitmentGamma), params.sigma_p, dt);
    let eps = gamma_effect(key.channel(Channel::SurvivalGamma), params.sigma_d, dt);
    let lagged = state.lagged() as f64;
    let recruits = poisson_draw(
        recruitment_mean(lagged, params) * e,
        key.channel(Channel::RecruitmentPoisson),
    );
    let n = state.current();
    let survival = (-params.delta_rate * dt * eps).exp();
    let survivors = binomial_draw(n, survival, key.channel(Channel::SurvivalBinomial));
    StepOutcome {
        recruits,
        survivors,
        next_n: recruits.saturating_add(survivors),
    }
}

/// Log-PMF of `y` given true count `n`: negative binomial with mean `n` and
/// size `1/σ_y²`.
pub fn measurement_logpdf(y: u64, n: u64, sigma_y: f64) -> Result<f64> {
    if !(sigma_y >= SIGMA_Y_MIN) || !sigma_y.is_finite() {
        return Err(Error::InvalidSigma(sigma_y));
    }
    Ok(negbin_logpmf(y, n as f64, 1.0 / (sigma_y * sigma_y)))
}

/// Draw a count with the law of [`measurement_logpdf`] via the gamma-Poisson
/// mixture.
pub fn measurement_draw(n: u64, sigma_y: f64, key: RngStreamKey) -> Result<u64> {
    if !(sigma_y >= SIGMA_Y_MIN) || !sigma_y.is_finite() {
        return Err(Error::InvalidSigma(sigma_y));
    }
    Ok(measurement_draw_unchecked(n as f64, sigma_y, key))
}

fn measurement_draw_unchecked(mean: f64, sigma_y: f64, key: RngStreamKey) -> u64 {
    if !(mean > 0.0) {
        return 0;
    }
    let size = 1.0 / (sigma_y * sigma_y);
    let mut rng = key.channel(Channel::Measurement).stream();
    let rate = match Gamma::new(size, mean / size) {
        Ok(g) => g.sample(&mut rng),
        Err(_) => mean,
    };
    if !(rate > 0.0) {
        return 0;
    }
    match Poisson::new(rate.min(Poisson::<f64>::MAX_LAMBDA)) {
        Ok(d) => {
            let v: f64 = d.sample(&mut rng);
            v as u64
        }
        Err(_) => 0,
    }
}

/// One step of the deterministic skeleton: noise replaced by its mean.
pub fn skeleton_step(state: &DelayState<f64>, params: &BlowflyParams) -> f64 {
    let dt = params.delta as f64;
    recruitment_mean(state.lagged(), params) + state.current() * (-params.delta_rate * dt).exp()
}

/// Equilibrium of the skeleton, `N0 · ln(PΔ / (1 - e^{-δΔ}))`; `None` when
/// recruitment cannot balance mortality.
pub fn skeleton_fixed_point(params: &BlowflyParams) -> Option<f64> {
    let dt = params.delta as f64;
    let ratio = params.p * dt / (1.0 - (-params.delta_rate * dt).exp());
    (ratio > 1.0).then(|| params.n0 * ratio.ln())
}

/// Iterate the skeleton `n_steps` times; returns `(day, N)` per step,
/// starting with the initial state.
pub fn skeleton_trajectory(params: &BlowflyParams, init: &DelayState<f64>, n_steps: usize) -> Vec<(u32, f64)> {
    let mut state = init.clone();
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push((state.time, state.current()));
    for _ in 0..n_steps {
        let next = skeleton_step(&state, params);
        state.buffer.push(next);
        state.time += params.delta;
        out.push((state.time, next));
    }
    out
}

/// Xia–Tong skeleton: `ν N_now + c N_lag^α exp(-N_lag / N0)`.
pub fn xt_skeleton_step(n_now: f64, n_lag: f64, params: &XTParams) -> f64 {
    let recruitment = if n_lag > 0.0 {
        params.c * n_lag.powf(params.alpha) * (-n_lag / params.n0_xt).exp()
    } else {
        0.0
    };
    params.nu * n_now + recruitment
}

/// Simulate `n_steps` Euler steps from `init`, drawing a measurement at every
/// observation day after the start when `with_measurement` is set.
pub fn simulate(
    params: &BlowflyParams,
    init: &DelayState,
    n_steps: usize,
    seed: u64,
    with_measurement: bool,
) -> Result<Trajectory> {
    params.validate()?;
    if init.buffer.len() != params.buffer_len() {
        return Err(Error::InvalidConfig("initial state length does not match tau/delta + 1".to_string()));
    }
    let base = RngStreamKey::new(seed);
    let mut state = init.clone();
    let mut times = vec![state.time];
    let mut states = vec![state.current() as f64];
    let mut observations = with_measurement.then(|| vec![None]);
    for step in 1..=n_steps as u64 {
        let out = process_step(&state, params, base.time(step));
        state.buffer.push(out.next_n);
        state.time += params.delta;
        times.push(state.time);
        states.push(out.next_n as f64);
        if let Some(obs) = observations.as_mut() {
            let y = (state.time % OBSERVATION_INTERVAL == 0)
                .then(|| measurement_draw_unchecked(out.next_n as f64, params.sigma_y, base.time(step)));
            obs.push(y);
        }
    }
    Ok(Trajectory {
        times,
        states,
        observations,
    })
}

/// The blowfly POMP: fixed step and delay, fixed initial state built from
/// the first eight observations.
#[derive(Clone, Debug)]
pub struct BlowflyModel {
    structure: BlowflyParams,
    init: DelayState,
}

impl BlowflyModel {
    /// `structure` supplies `delta` and `tau` (its estimated fields are
    /// ignored by the filters, which receive parameter vectors).
    pub fn new(structure: BlowflyParams, init: DelayState) -> Result<Self> {
        crate::model::check_step(structure.delta, structure.tau)?;
        if init.buffer.len() != structure.buffer_len() {
            return Err(Error::InvalidConfig("initial state length does not match tau/delta + 1".to_string()));
        }
        Ok(BlowflyModel { structure, init })
    }

    pub fn from_series(series: &crate::data::ObservationSeries, delta: u32, tau: u32) -> Result<Self> {
        let init = crate::data::initial_state(&series.init_window(), delta, tau)?;
        let structure = BlowflyParams {
            delta,
            tau,
            ..BlowflyParams::published_mle()
        };
        BlowflyModel::new(structure, init)
    }

    pub fn params(&self, theta: &[f64]) -> BlowflyParams {
        self.structure.with_estimated(theta)
    }

    pub fn init(&self) -> &DelayState {
        &self.init
    }

    pub fn structure(&self) -> &BlowflyParams {
        &self.structure
    }
}

impl Pomp for BlowflyModel {
    type State = DelayState;

    fn param_names(&self) -> Vec<String> {
        BLOWFLY_PARAM_NAMES.iter().map(|s| s.to_string()).collect()
    }

    fn to_estimation(&self, natural: &[f64]) -> Result<Vec<f64>> {
        Ok(self.params(natural).to_estimation_scale()?.to_vec())
    }

    fn to_natural(&self, estimation: &[f64]) -> Vec<f64> {
        estimation.iter().map(|v| v.exp()).collect()
    }

    fn initial_state(&self, _theta: &[f64], _key: RngStreamKey) -> DelayState {
        self.init.clone()
    }

    fn advance(&self, state: &mut DelayState, theta: &[f64], obs_index: usize, key: RngStreamKey) {
        let params = self.params(theta);
        let substeps = params.steps_per_observation() as u64;
        for s in 0..substeps {
            let out = process_step(state, &params, key.time(obs_index as u64 * substeps + s));
            state.buffer.push(out.next_n);
            state.time += params.delta;
        }
    }

    fn measurement_logpdf(&self, y: f64, state: &DelayState, theta: &[f64]) -> f64 {
        let sigma_y = theta[5];
        if !(sigma_y > 0.0) {
            return f64::NEG_INFINITY;
        }
        negbin_logpmf(y as u64, state.current() as f64, 1.0 / (sigma_y * sigma_y))
    }

    fn measurement_draw(&self, state: &DelayState, theta: &[f64], key: RngStreamKey) -> f64 {
        measurement_draw_unchecked(state.current() as f64, theta[5], key) as f64
    }

    fn observed_quantity(&self, state: &DelayState) -> f64 {
        state.current() as f64
    }
}
