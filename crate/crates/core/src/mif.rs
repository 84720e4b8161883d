//! Iterated filtering with a perturbed parameter swarm.
//!
//! Each particle carries its own parameter vector on the estimation scale.
//! Before every observation step the vectors receive independent Gaussian
//! noise with standard deviation `rw_sd · a^{m-1}` (iteration `m`,
//! 1-based); parameters are resampled together with the states, and the swarm
//! that survives iteration `m` seeds iteration `m + 1`. After `M` iterations
//! the swarm mean is re-evaluated with unperturbed replicate filters.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[allow(unused_imports)]
use crate::fmath::*;
use crate::model::Pomp;
use crate::rng::{derive_seed, RngStreamKey};
use crate::smc::{filter_pass, replicate_loglik, ParticleEnsemble, PassParams};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MifConfig {
    #[serde(rename = "J")]
    pub particles: usize,
    #[serde(rename = "M")]
    pub iterations: usize,
    /// Random-walk standard deviations on the estimation scale, one per
    /// parameter. Zero freezes a parameter.
    pub rw_sd: Vec<f64>,
    pub cooling_factor: f64,
    pub seed: u64,
    /// Particles used to re-evaluate the final estimate.
    pub eval_particles: usize,
    pub eval_replicates: usize,
}

impl MifConfig {
    /// J = 5000, M = 60, a = 0.95, rw_sd = 0.02 for each of `n_params`
    /// parameters; final likelihood from 10 replicate filters.
    pub fn defaults(n_params: usize, seed: u64) -> Self {
        MifConfig {
            particles: 5000,
            iterations: 60,
            rw_sd: vec![0.02; n_params],
            cooling_factor: 0.95,
            seed,
            eval_particles: 5000,
            eval_replicates: 10,
        }
    }

    pub fn validate(&self, n_params: usize) -> Result<()> {
        if self.particles < 2 || self.eval_particles < 2 {
            return Err(Error::InvalidConfig("J must be at least 2".into()));
        }
        if self.iterations < 1 {
            return Err(Error::InvalidConfig("M must be at least 1".into()));
        }
        if self.rw_sd.len() != n_params || self.rw_sd.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::InvalidConfig(alloc::format!(
                "rw_sd needs {n_params} non-negative entries"
            )));
        }
        if !(self.cooling_factor > 0.0 && self.cooling_factor <= 1.0) {
            return Err(Error::InvalidConfig("cooling factor must lie in (0, 1]".into()));
        }
        if self.eval_replicates < 2 {
            return Err(Error::InvalidConfig("need at least two evaluation replicates".into()));
        }
        Ok(())
    }

    /// Perturbation standard deviations at iteration `m` (1-based).
    pub fn sd_at(&self, m: usize) -> Vec<f64> {
        let scale = self.cooling_factor.powi(m as i32 - 1);
        self.rw_sd.iter().map(|s| s * scale).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MifIteration {
    pub iteration: usize,
    /// Log-likelihood reported by the perturbed filter of this iteration.
    pub loglik: f64,
    /// Swarm mean mapped to the natural scale.
    pub params: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MifTrace {
    pub param_names: Vec<alloc::string::String>,
    pub start: Vec<f64>,
    pub iterations: Vec<MifIteration>,
    pub final_params: Vec<f64>,
    pub final_loglik: f64,
    pub final_loglik_se: f64,
}

/// Mean of the rows, computed as `first + mean(row - first)` so identical
/// rows return the first row bit for bit.
fn swarm_mean(rows: &[Vec<f64>]) -> Vec<f64> {
    let first = &rows[0];
    let n = rows.len() as f64;
    (0..first.len())
        .map(|i| first[i] + rows.iter().map(|r| r[i] - first[i]).sum::<f64>() / n)
        .collect()
}

/// Maximize the likelihood of `obs` from natural-scale `start`.
pub fn mif_search<M: Pomp>(model: &M, obs: &[f64], start: &[f64], config: &MifConfig) -> Result<MifTrace> {
    config.validate(start.len())?;
    let start_est = model.to_estimation(start)?;
    let j = config.particles;
    let mut swarm: Vec<Vec<f64>> = vec![start_est; j];
    let mut iterations = Vec::with_capacity(config.iterations);
    for m in 1..=config.iterations {
        let sd = config.sd_at(m);
        let iteration = (m - 1) as u64;
        let base = RngStreamKey::new(config.seed).iteration(iteration);
        let states = swarm
            .iter()
            .enumerate()
            .map(|(i, est)| model.initial_state(&model.to_natural(est), base.particle(i as u64)))
            .collect();
        let mut ens = ParticleEnsemble {
            states,
            params: swarm,
            log_weights: vec![-(j as f64).ln(); j],
        };
        let pass = filter_pass(model, &mut ens, PassParams::Perturbed(&sd), obs, config.seed, iteration).map_err(
            |e| match e {
                Error::ParticleDepletion { step, loglik_so_far, .. } => Error::ParticleDepletion {
                    step,
                    iteration: m,
                    loglik_so_far,
                },
                Error::Divergence { .. } => Error::Divergence { iteration: m },
                other => other,
            },
        )?;
        swarm = ens.params;
        let mean = model.to_natural(&swarm_mean(&swarm));
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { iteration: m });
        }
        iterations.push(MifIteration {
            iteration: m,
            loglik: pass.loglik,
            params: mean,
        });
    }
    let final_params = iterations.last().map(|it| it.params.clone()).unwrap_or_default();
    let eval = replicate_loglik(
        model,
        &final_params,
        obs,
        config.eval_particles,
        config.eval_replicates,
        derive_seed(config.seed, u64::MAX),
    )?;
    Ok(MifTrace {
        param_names: model.param_names(),
        start: start.to_vec(),
        iterations,
        final_params,
        final_loglik: eval.loglik,
        final_loglik_se: eval.se,
    })
}

/// Independent searches from `starts`; the best final log-likelihood wins,
/// ties going to the lowest index. Returns `(best index, all traces)`.
pub fn mif_restarts<M: Pomp>(
    model: &M,
    obs: &[f64],
    starts: &[Vec<f64>],
    config: &MifConfig,
) -> Result<(usize, Vec<MifTrace>)> {
    if starts.is_empty() {
        return Err(Error::InvalidConfig("no starting points".into()));
    }
    let traces = starts
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let cfg = MifConfig {
                seed: derive_seed(config.seed, i as u64),
                ..config.clone()
            };
            mif_search(model, obs, s, &cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, t) in traces.iter().enumerate() {
        if t.final_loglik > traces[best].final_loglik {
            best = i;
        }
    }
    Ok((best, traces))
}

/// Multiplicative jitter of a natural-scale start: each positive component
/// is scaled by `exp(U(-spread, spread))`.
pub fn jittered_starts<M: Pomp>(model: &M, center: &[f64], count: usize, spread: f64, seed: u64) -> Result<Vec<Vec<f64>>> {
    use rand::Rng;
    let est = model.to_estimation(center)?;
    Ok((0..count)
        .map(|i| {
            if i == 0 {
                return center.to_vec();
            }
            let mut rng = RngStreamKey::new(seed).particle(i as u64).stream();
            let moved: Vec<f64> = est.iter().map(|v| v + spread * (2.0 * rng.random::<f64>() - 1.0)).collect();
            model.to_natural(&moved)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lgssm::LinearGaussian;
    use crate::smc::pfilter_at;

    #[test]
    fn cooling_schedule_is_geometric() {
        let cfg = MifConfig {
            rw_sd: vec![0.1, 0.0],
            cooling_factor: 0.9,
            ..MifConfig::defaults(2, 1)
        };
        for m in 1..=10 {
            let sd = cfg.sd_at(m);
            assert_eq!(sd[0], 0.1 * 0.9f64.powi(m as i32 - 1));
            assert_eq!(sd[1], 0.0);
        }
    }

    #[test]
    fn config_validation() {
        let ok = MifConfig::defaults(3, 1);
        assert!(ok.validate(3).is_ok());
        assert!(ok.validate(2).is_err());
        assert!(MifConfig { particles: 1, ..ok.clone() }.validate(3).is_err());
        assert!(MifConfig { iterations: 0, ..ok.clone() }.validate(3).is_err());
        assert!(MifConfig { cooling_factor: 0.0, ..ok.clone() }.validate(3).is_err());
        assert!(MifConfig { rw_sd: vec![0.1, -0.1, 0.0], ..ok }.validate(3).is_err());
    }

    #[test]
    fn zero_perturbation_reproduces_plain_filters() {
        let m = LinearGaussian;
        let truth = [0.7, 1.0, 0.5];
        let ys = m.simulate(&truth, 40, 3);
        let start = [0.4, 1.2, 0.8];
        let cfg = MifConfig {
            particles: 300,
            iterations: 4,
            rw_sd: vec![0.0; 3],
            cooling_factor: 0.95,
            seed: 17,
            eval_particles: 300,
            eval_replicates: 2,
        };
        let trace = mif_search(&m, &ys, &start, &cfg).unwrap();
        let theta = m.to_natural(&m.to_estimation(&start).unwrap());
        for it in &trace.iterations {
            assert_eq!(it.params, theta);
            let plain = pfilter_at(&m, &theta, &ys, 300, 17, (it.iteration - 1) as u64).unwrap();
            assert_eq!(it.loglik, plain.loglik);
        }
        assert_eq!(trace.final_params, theta);
    }

    #[test]
    fn search_moves_towards_truth() {
        let m = LinearGaussian;
        let truth = [0.7, 1.0, 0.5];
        let ys = m.simulate(&truth, 200, 8);
        let cfg = MifConfig {
            particles: 500,
            iterations: 20,
            rw_sd: vec![0.05, 0.0, 0.0],
            cooling_factor: 0.9,
            seed: 2,
            eval_particles: 500,
            eval_replicates: 3,
        };
        let trace = mif_search(&m, &ys, &[0.1, 1.0, 0.5], &cfg).unwrap();
        assert!((trace.final_params[0] - 0.7).abs() < 0.15, "{:?}", trace.final_params);
        assert_eq!(trace.final_params[1], 1.0);
    }

    #[test]
    fn restarts_pick_best() {
        let m = LinearGaussian;
        let ys = m.simulate(&[0.7, 1.0, 0.5], 50, 8);
        let cfg = MifConfig {
            particles: 100,
            iterations: 2,
            rw_sd: vec![0.02, 0.0, 0.0],
            cooling_factor: 0.9,
            seed: 2,
            eval_particles: 100,
            eval_replicates: 2,
        };
        let starts = jittered_starts(&m, &[0.5, 1.0, 0.5], 3, 0.3, 4).unwrap();
        assert_eq!(starts[0], vec![0.5, 1.0, 0.5]);
        let (best, traces) = mif_restarts(&m, &ys, &starts, &cfg).unwrap();
        assert!(traces.iter().all(|t| t.final_loglik <= traces[best].final_loglik));
    }
}
