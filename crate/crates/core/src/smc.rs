//! Bootstrap particle filter.
//!
//! Particles are propagated through [`Pomp::advance`], weighted by the
//! measurement density, and resampled systematically at every observation.
//! All randomness is keyed by particle slot, so the result does not depend on
//! the order in which particles are processed (or on the number of threads
//! when the `parallel` feature is on).

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[allow(unused_imports)]
use crate::fmath::*;
use crate::model::Pomp;
use crate::rng::{derive_seed, Channel, RngStreamKey};
use crate::special::{log_mean_exp, log_sum_exp};
use crate::{Error, Result};

/// `J` particles: states, per-particle estimation-scale parameters (empty
/// rows when all particles share one parameter vector) and log-weights.
#[derive(Clone, Debug)]
pub struct ParticleEnsemble<S> {
    pub states: Vec<S>,
    pub params: Vec<Vec<f64>>,
    pub log_weights: Vec<f64>,
}

impl<S: Clone> ParticleEnsemble<S> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    fn gather(&mut self, ancestors: &[usize]) {
        self.states = ancestors.iter().map(|&a| self.states[a].clone()).collect();
        if self.params.iter().any(|p| !p.is_empty()) {
            self.params = ancestors.iter().map(|&a| self.params[a].clone()).collect();
        }
        let uniform = -(ancestors.len() as f64).ln();
        self.log_weights.iter_mut().for_each(|w| *w = uniform);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterResult {
    pub loglik: f64,
    pub loglik_se: Option<f64>,
    pub cond_logliks: Vec<f64>,
    pub ess: Vec<f64>,
    pub filter_means: Vec<f64>,
    #[serde(rename = "J")]
    pub particles: usize,
    pub seed: u64,
}

/// Normalized weights from log-weights; `None` if every weight is zero.
fn normalize(log_weights: &[f64]) -> Option<Vec<f64>> {
    let max = log_weights
        .iter()
        .copied()
        .filter(|w| !w.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let mut w: Vec<f64> = log_weights
        .iter()
        .map(|&lw| if lw.is_nan() { 0.0 } else { (lw - max).exp() })
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    Some(w)
}

/// `(Σw)² / Σw²` of normalized weights, clamped to `[1, J]`.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let s: f64 = weights.iter().sum();
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    (s * s / s2).clamp(1.0, weights.len() as f64)
}

fn systematic_from_weights(w: &[f64], key: RngStreamKey) -> Vec<usize> {
    let j = w.len();
    let offset: f64 = key.stream().random::<f64>();
    let mut ancestors = Vec::with_capacity(j);
    let mut cumulative = 0.0;
    let mut i = 0;
    for (k, &wk) in w.iter().enumerate() {
        // Scaled cumulative weight; the last one is exactly J.
        cumulative = if k + 1 == j { j as f64 } else { cumulative + wk * j as f64 };
        while i < j && (i as f64 + offset) < cumulative {
            ancestors.push(k);
            i += 1;
        }
    }
    while ancestors.len() < j {
        ancestors.push(j - 1);
    }
    ancestors
}

/// Systematic resampling: a single uniform offset on a grid of spacing `1/J`.
/// Particle `i` receives `⌊J w_i⌋` or `⌈J w_i⌉` offspring.
pub fn systematic_resample(log_weights: &[f64], key: RngStreamKey) -> Result<Vec<usize>> {
    let w = normalize(log_weights).ok_or(Error::AllWeightsDegenerate)?;
    Ok(systematic_from_weights(&w, key))
}

#[cfg(feature = "parallel")]
fn for_each_particle<S, F>(ens: &mut ParticleEnsemble<S>, f: F)
where
    S: Send,
    F: Fn(usize, &mut S, &mut Vec<f64>, &mut f64) + Sync + Send,
{
    use rayon::prelude::*;
    ens.states
        .par_iter_mut()
        .zip(ens.params.par_iter_mut())
        .zip(ens.log_weights.par_iter_mut())
        .enumerate()
        .for_each(|(j, ((s, p), w))| f(j, s, p, w));
}

#[cfg(not(feature = "parallel"))]
fn for_each_particle<S, F>(ens: &mut ParticleEnsemble<S>, f: F)
where
    F: Fn(usize, &mut S, &mut Vec<f64>, &mut f64),
{
    ens.states
        .iter_mut()
        .zip(ens.params.iter_mut())
        .zip(ens.log_weights.iter_mut())
        .enumerate()
        .for_each(|(j, ((s, p), w))| f(j, s, p, w));
}

/// Parameters used by one filtering pass.
pub(crate) enum PassParams<'a> {
    /// Every particle uses this natural-scale vector.
    Fixed(&'a [f64]),
    /// Each particle carries estimation-scale parameters that receive
    /// Gaussian noise with these standard deviations before every step.
    Perturbed(&'a [f64]),
}

/// One filtering pass over `obs`, mutating `ens` in place.
pub(crate) fn filter_pass<M: Pomp>(
    model: &M,
    ens: &mut ParticleEnsemble<M::State>,
    params: PassParams<'_>,
    obs: &[f64],
    seed: u64,
    iteration: u64,
) -> Result<FilterResult> {
    let j = ens.len();
    let base = RngStreamKey::new(seed).iteration(iteration);
    let mut result = FilterResult {
        loglik: 0.0,
        loglik_se: None,
        cond_logliks: Vec::with_capacity(obs.len()),
        ess: Vec::with_capacity(obs.len()),
        filter_means: Vec::with_capacity(obs.len()),
        particles: j,
        seed,
    };
    for (k, &y) in obs.iter().enumerate() {
        match params {
            PassParams::Fixed(theta) => for_each_particle(ens, |i, state, _, logw| {
                let key = base.particle(i as u64);
                model.advance(state, theta, k, key);
                *logw = model.measurement_logpdf(y, state, theta);
            }),
            PassParams::Perturbed(sd) => for_each_particle(ens, |i, state, est, logw| {
                let key = base.particle(i as u64);
                let mut rng = key.time(k as u64).channel(Channel::Perturbation).stream();
                for (p, &s) in est.iter_mut().zip(sd) {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    if s > 0.0 {
                        *p += s * z;
                    }
                }
                let theta = model.to_natural(est);
                if theta.iter().any(|v| !v.is_finite()) {
                    *logw = f64::NAN;
                    return;
                }
                model.advance(state, &theta, k, key);
                *logw = model.measurement_logpdf(y, state, &theta);
            }),
        }
        if matches!(params, PassParams::Perturbed(_)) && ens.log_weights.iter().any(|w| w.is_nan()) {
            return Err(Error::Divergence {
                iteration: iteration as usize,
            });
        }
        let Some(w) = normalize(&ens.log_weights) else {
            return Err(Error::ParticleDepletion {
                step: k,
                iteration: iteration as usize,
                loglik_so_far: result.loglik,
            });
        };
        let cond = log_mean_exp(&ens.log_weights);
        result.cond_logliks.push(cond);
        result.loglik += cond;
        result.ess.push(effective_sample_size(&w));
        result
            .filter_means
            .push(w.iter().zip(&ens.states).map(|(wi, s)| wi * model.observed_quantity(s)).sum());
        let ancestors = systematic_from_weights(&w, base.time(k as u64).channel(Channel::Resampling));
        ens.gather(&ancestors);
    }
    Ok(result)
}

/// Particle filter with iteration index 0; see [`pfilter_at`].
pub fn pfilter<M: Pomp>(model: &M, theta: &[f64], obs: &[f64], particles: usize, seed: u64) -> Result<FilterResult> {
    pfilter_at(model, theta, obs, particles, seed, 0)
}

/// Log-likelihood of `obs` at natural-scale `theta` by a bootstrap filter
/// with `particles` particles. `iteration` is the iteration coordinate of the
/// RNG keys; iterated filtering with zero perturbation at iteration `m`
/// reproduces `pfilter_at(.., m)` exactly.
pub fn pfilter_at<M: Pomp>(
    model: &M,
    theta: &[f64],
    obs: &[f64],
    particles: usize,
    seed: u64,
    iteration: u64,
) -> Result<FilterResult> {
    if particles < 2 {
        return Err(Error::InvalidConfig("particle count must be at least 2".into()));
    }
    let base = RngStreamKey::new(seed).iteration(iteration);
    let mut ens = ParticleEnsemble {
        states: (0..particles)
            .map(|i| model.initial_state(theta, base.particle(i as u64)))
            .collect(),
        params: vec![Vec::new(); particles],
        log_weights: vec![-(particles as f64).ln(); particles],
    };
    filter_pass(model, &mut ens, PassParams::Fixed(theta), obs, seed, iteration)
}

/// Combined estimate from replicate filters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateEstimate {
    /// `log(mean(exp(loglik_r)))`.
    pub loglik: f64,
    /// Jackknife standard error of `loglik`.
    pub se: f64,
    pub replicates: Vec<f64>,
    pub seeds: Vec<u64>,
}

/// Jackknife standard error of the log-mean-exp of `values`.
pub fn log_mean_exp_se(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return f64::NAN;
    }
    let mut loo = Vec::with_capacity(n);
    let mut rest = Vec::with_capacity(n - 1);
    for i in 0..n {
        rest.clear();
        rest.extend(values.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, v)| *v));
        loo.push(log_sum_exp(&rest) - ((n - 1) as f64).ln());
    }
    let mean = loo.iter().sum::<f64>() / n as f64;
    let ss: f64 = loo.iter().map(|v| (v - mean) * (v - mean)).sum();
    ((n - 1) as f64 / n as f64 * ss).sqrt()
}

/// Run one filter per seed and combine on the likelihood scale.
pub fn replicate_loglik_with_seeds<M: Pomp>(
    model: &M,
    theta: &[f64],
    obs: &[f64],
    particles: usize,
    seeds: &[u64],
) -> Result<ReplicateEstimate> {
    if seeds.len() < 2 {
        return Err(Error::InvalidConfig("at least two replicates are required".into()));
    }
    let replicates = seeds
        .iter()
        .map(|&s| pfilter(model, theta, obs, particles, s).map(|r| r.loglik))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ReplicateEstimate {
        loglik: log_mean_exp(&replicates),
        se: log_mean_exp_se(&replicates),
        replicates,
        seeds: seeds.to_vec(),
    })
}

/// `n_reps` filters with seeds derived from `seed`.
pub fn replicate_loglik<M: Pomp>(
    model: &M,
    theta: &[f64],
    obs: &[f64],
    particles: usize,
    n_reps: usize,
    seed: u64,
) -> Result<ReplicateEstimate> {
    let seeds: Vec<u64> = (0..n_reps as u64).map(|r| derive_seed(seed, r)).collect();
    replicate_loglik_with_seeds(model, theta, obs, particles, &seeds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lgssm::{kalman_loglik, LinearGaussian};
    use proptest::prelude::*;

    fn counts(anc: &[usize], j: usize) -> Vec<usize> {
        let mut c = vec![0; j];
        for &a in anc {
            c[a] += 1;
        }
        c
    }

    #[test]
    fn uniform_weights_give_identity() {
        let anc = systematic_resample(&[0.0; 7], RngStreamKey::new(3)).unwrap();
        assert_eq!(anc, (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn single_surviving_weight() {
        let mut lw = vec![f64::NEG_INFINITY; 6];
        lw[4] = 0.0;
        let anc = systematic_resample(&lw, RngStreamKey::new(11)).unwrap();
        assert!(anc.iter().all(|&a| a == 4));
    }

    #[test]
    fn integral_expected_counts_are_exact() {
        // w = (0.5, 0.3, 0.2) spread over ten particles.
        let mut lw = vec![f64::NEG_INFINITY; 10];
        lw[0] = 0.5f64.ln();
        lw[1] = 0.3f64.ln();
        lw[2] = 0.2f64.ln();
        for seed in 0..200 {
            let anc = systematic_resample(&lw, RngStreamKey::new(seed)).unwrap();
            let c = counts(&anc, 10);
            assert_eq!(&c[..3], &[5, 3, 2]);
        }
    }

    #[test]
    fn degenerate_weights_error() {
        assert_eq!(
            systematic_resample(&[f64::NEG_INFINITY; 3], RngStreamKey::new(1)),
            Err(Error::AllWeightsDegenerate)
        );
    }

    #[test]
    fn ess_bounds() {
        assert_eq!(effective_sample_size(&[0.25; 4]), 4.0);
        assert_eq!(effective_sample_size(&[1.0, 0.0, 0.0]), 1.0);
    }

    #[test]
    fn filter_result_invariants() {
        let m = LinearGaussian;
        let theta = [0.8, 1.0, 0.7];
        let ys = m.simulate(&theta, 30, 5);
        let r = pfilter(&m, &theta, &ys, 500, 9).unwrap();
        let total: f64 = r.cond_logliks.iter().sum();
        assert!((r.loglik - total).abs() < 1e-9);
        assert!(r.ess.iter().all(|&e| (1.0..=500.0).contains(&e)));
        assert_eq!(r.filter_means.len(), 30);
        assert_eq!(pfilter(&m, &theta, &ys, 500, 9).unwrap(), r);
        assert!((r.loglik - kalman_loglik(&theta, &ys)).abs() < 2.0);
    }

    #[test]
    fn too_few_particles() {
        assert!(pfilter(&LinearGaussian, &[0.5, 1.0, 1.0], &[0.0], 1, 0).is_err());
    }

    #[test]
    fn identical_seeds_have_zero_se() {
        let m = LinearGaussian;
        let theta = [0.5, 1.0, 1.0];
        let ys = m.simulate(&theta, 20, 1);
        let est = replicate_loglik_with_seeds(&m, &theta, &ys, 200, &[4, 4]).unwrap();
        assert_eq!(est.se, 0.0);
        assert_eq!(est.replicates[0], est.replicates[1]);
        assert!((est.loglik - est.replicates[0]).abs() < 1e-12);
        assert!(replicate_loglik_with_seeds(&m, &theta, &ys, 200, &[4]).is_err());
    }

    #[test]
    fn depletion_is_reported() {
        // A measurement far outside the support of a near-noiseless model.
        let m = LinearGaussian;
        let theta = [0.5, 1e-3, 1e-3];
        let err = pfilter(&m, &theta, &[0.0, 1e300], 100, 1).unwrap_err();
        assert!(matches!(err, Error::ParticleDepletion { step: 1, .. }), "{err:?}");
    }

    proptest! {
        #[test]
        fn systematic_counts_bounded(raw in proptest::collection::vec(0.0f64..1.0, 2..60), seed in 0u64..10_000) {
            let total: f64 = raw.iter().sum();
            prop_assume!(total > 0.0);
            let lw: Vec<f64> = raw.iter().map(|w| w.ln()).collect();
            let anc = systematic_resample(&lw, RngStreamKey::new(seed)).unwrap();
            let j = raw.len();
            prop_assert_eq!(anc.len(), j);
            for (c, w) in counts(&anc, j).iter().zip(&raw) {
                let expected = w / total * j as f64;
                prop_assert!((*c as f64) >= expected.floor() - 1e-9 && (*c as f64) <= expected.ceil() + 1e-9,
                    "count {} expected {}", c, expected);
            }
        }
    }
}
