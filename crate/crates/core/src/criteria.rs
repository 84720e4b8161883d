//! Fitting criteria for the Xia–Tong nonlinear autoregression and the
//! cross-model comparison reports.
//!
//! All series arguments are the full count series `y_1..y_T`; the first
//! [`INIT_LEN`] values serve only as history and the criteria are computed
//! over `y_9..y_T`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[allow(unused_imports)]
use crate::fmath::*;
use crate::blowfly::{xt_skeleton_step, XTParams};
use crate::data::INIT_LEN;
use crate::model::{aic, FitResult};
use crate::optim::NelderMead;
use crate::special::{chi_squared_quantile, LN_2PI};
use crate::{Error, Result};

/// Parameters of the NLAR model counted for AIC: c, α, N0, ν and σ².
pub const XT_PARAM_COUNT: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApeConfig {
    pub horizon: usize,
    /// One weight per horizon `1..=horizon`.
    pub weights: Vec<f64>,
}

impl ApeConfig {
    /// Uniform weights over horizons `1..=horizon`.
    pub fn uniform(horizon: usize) -> Self {
        ApeConfig {
            horizon,
            weights: vec![1.0; horizon],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon < 1 {
            return Err(Error::InvalidConfig("APE horizon must be at least 1".into()));
        }
        if self.weights.len() != self.horizon {
            return Err(Error::InvalidConfig(format!(
                "{} weights given for horizon {}",
                self.weights.len(),
                self.horizon
            )));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) || self.weights.iter().all(|w| *w == 0.0) {
            return Err(Error::InvalidConfig("weights must be non-negative and not all zero".into()));
        }
        Ok(())
    }
}

impl Default for ApeConfig {
    fn default() -> Self {
        ApeConfig::uniform(10)
    }
}

fn check_history(series: &[f64], params: &XTParams) -> Result<()> {
    params.validate()?;
    if params.lag_steps() > INIT_LEN - 1 {
        return Err(Error::InsufficientHistory(format!(
            "lag of {} steps needs more than {INIT_LEN} history values",
            params.lag_steps()
        )));
    }
    if series.len() <= INIT_LEN {
        return Err(Error::InsufficientHistory(format!(
            "{} values leave an empty fitting window",
            series.len()
        )));
    }
    Ok(())
}

/// One-step residuals `y_k - ŷ_k` over the fitting window, with predictions
/// built from observed history.
pub fn one_step_residuals(params: &XTParams, series: &[f64]) -> Result<Vec<f64>> {
    check_history(series, params)?;
    let lag = params.lag_steps();
    Ok((INIT_LEN..series.len())
        .map(|k| series[k] - xt_skeleton_step(series[k - 1], series[k - 1 - lag], params))
        .collect())
}

/// Gaussian one-step log-likelihood on the count scale. The variance is
/// `params.sigma2` when set, otherwise profiled as `RSS / n`.
pub fn xt_gaussian_loglik(params: &XTParams, series: &[f64]) -> Result<f64> {
    let resid = one_step_residuals(params, series)?;
    let n = resid.len() as f64;
    let rss: f64 = resid.iter().map(|r| r * r).sum();
    match params.sigma2 {
        Some(s2) => Ok(-0.5 * (n * (LN_2PI + s2.ln()) + rss / s2)),
        None => {
            let s2 = rss / n;
            Ok(-0.5 * n * (LN_2PI + s2.ln() + 1.0))
        }
    }
}

/// Weighted mean squared m-step prediction error over horizons `1..=M`.
///
/// A prediction of `y_k` from origin `o = k - m` iterates the skeleton from
/// the observations up to `y_o`, feeding its own outputs forward; lagged
/// values at or before the origin come from the data. Only origins with a
/// full lag history (`o ≥ y_8`) contribute.
pub fn ape_objective(params: &XTParams, series: &[f64], config: &ApeConfig) -> Result<f64> {
    config.validate()?;
    check_history(series, params)?;
    let lag = params.lag_steps();
    let n = series.len();
    let mut sums = vec![0.0; config.horizon];
    let mut counts = vec![0usize; config.horizon];
    let mut path = vec![0.0; config.horizon + 1];
    for origin in INIT_LEN - 1..n - 1 {
        path[0] = series[origin];
        let steps = config.horizon.min(n - 1 - origin);
        for m in 1..=steps {
            let lag_index = origin + m - 1 - lag;
            let lagged = if lag_index <= origin { series[lag_index] } else { path[lag_index - origin] };
            path[m] = xt_skeleton_step(path[m - 1], lagged, params);
            let err = series[origin + m] - path[m];
            sums[m - 1] += err * err;
            counts[m - 1] += 1;
        }
    }
    let total_weight: f64 = config.weights.iter().sum();
    let weighted: f64 = (0..config.horizon)
        .filter(|&m| counts[m] > 0)
        .map(|m| config.weights[m] * sums[m] / counts[m] as f64)
        .sum();
    Ok(weighted / total_weight)
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn to_unconstrained(p: &XTParams) -> Vec<f64> {
    vec![p.c.ln(), p.alpha.ln(), p.n0_xt.ln(), logit(p.nu)]
}

fn from_unconstrained(x: &[f64], template: &XTParams) -> XTParams {
    XTParams {
        c: x[0].exp(),
        alpha: x[1].exp(),
        n0_xt: x[2].exp(),
        nu: logistic(x[3]),
        tau: template.tau,
        sigma2: None,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XtFit {
    pub params: XTParams,
    pub objective: f64,
    pub derived: DerivedQuantities,
    pub fit: FitResult,
}

/// Minimize the APE criterion by Nelder–Mead on
/// `(ln c, ln α, ln N0, logit ν)`, keeping the best of `starts`.
pub fn ape_fit(series: &[f64], config: &ApeConfig, starts: &[XTParams]) -> Result<XtFit> {
    config.validate()?;
    if starts.is_empty() {
        return Err(Error::InvalidConfig("no starting points".into()));
    }
    for s in starts {
        check_history(series, s)?;
    }
    let nm = NelderMead {
        f_tol: 1e-12,
        max_evals: 20_000,
        initial_step: 0.2,
        ..NelderMead::default()
    };
    let mut best: Option<(crate::optim::Minimum, &XTParams)> = None;
    let mut evals = 0;
    for start in starts {
        let objective = |x: &[f64]| {
            let p = from_unconstrained(x, start);
            ape_objective(&p, series, config).unwrap_or(f64::INFINITY)
        };
        let m = nm.minimize_polished(objective, &to_unconstrained(start), 5);
        evals += m.evals;
        if m.f.is_finite() && best.as_ref().is_none_or(|(b, _)| m.f < b.f) {
            best = Some((m, start));
        }
    }
    let (best, template) =
        best.ok_or_else(|| Error::OptimFailed("no start produced a finite prediction error".to_string()))?;
    let params = from_unconstrained(&best.x, template);
    let loglik = xt_gaussian_loglik(&params, series)?;
    let resid = one_step_residuals(&params, series)?;
    let sigma2 = resid.iter().map(|r| r * r).sum::<f64>() / resid.len() as f64;
    Ok(XtFit {
        derived: derived_quantities(&params),
        objective: best.f,
        fit: FitResult {
            model: format!("xt-gaussian(M={})", config.horizon),
            param_names: ["c", "alpha", "N0_xt", "nu", "sigma2"].iter().map(|s| s.to_string()).collect(),
            params: vec![params.c, params.alpha, params.n0_xt, params.nu, sigma2],
            loglik,
            loglik_se: None,
            k: XT_PARAM_COUNT,
            aic: aic(loglik, XT_PARAM_COUNT),
            objective: Some(best.f),
            converged: best.converged,
            evaluations: evals,
        },
        params,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedQuantities {
    /// Eggs laid per adult per bi-day, `c`.
    pub eggs_rate: f64,
    /// Adult population maximizing recruitment, `α N0`.
    pub recruit_maximizer: f64,
    /// Adult life expectancy in days, `2 / (1 - ν)`.
    pub life_expectancy_days: f64,
}

pub fn derived_quantities(params: &XTParams) -> DerivedQuantities {
    DerivedQuantities {
        eggs_rate: params.c,
        recruit_maximizer: params.alpha * params.n0_xt,
        life_expectancy_days: 2.0 / (1.0 - params.nu),
    }
}

/// Inverse of [`derived_quantities`] given the exponent α.
pub fn from_derived(derived: &DerivedQuantities, alpha: f64, tau: u32) -> XTParams {
    XTParams {
        c: derived.eggs_rate,
        alpha,
        n0_xt: derived.recruit_maximizer / alpha,
        nu: 1.0 - 2.0 / derived.life_expectancy_days,
        tau,
        sigma2: None,
    }
}

/// Published one-step APE estimates: c = 20.1, α = 0.846, αN0 = 499,
/// life expectancy 8.33 days.
pub fn ape1_params() -> XTParams {
    from_derived(
        &DerivedQuantities {
            eggs_rate: 20.1,
            recruit_maximizer: 499.0,
            life_expectancy_days: 8.33,
        },
        0.846,
        14,
    )
}

/// Published multi-step APE estimates: c = 592, α = 0.263, αN0 = 344,
/// life expectancy 5.67 days.
pub fn ape_t_params() -> XTParams {
    from_derived(
        &DerivedQuantities {
            eggs_rate: 592.0,
            recruit_maximizer: 344.0,
            life_expectancy_days: 5.67,
        },
        0.263,
        14,
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChisqReport {
    pub twice_diff: f64,
    pub df: u32,
    pub threshold_95: f64,
    pub plausible_both: bool,
}

/// Compare twice the log-likelihood gap with the 95% point of χ²(df).
pub fn chisq_compare(loglik_a: f64, loglik_b: f64, df: u32) -> Result<ChisqReport> {
    if df < 1 {
        return Err(Error::InvalidConfig("df must be at least 1".into()));
    }
    let twice_diff = 2.0 * (loglik_a - loglik_b).abs();
    let threshold_95 = chi_squared_quantile(0.95, df as f64);
    Ok(ChisqReport {
        twice_diff,
        df,
        threshold_95,
        plausible_both: twice_diff <= threshold_95,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: String,
    pub k: usize,
    pub loglik: f64,
    pub aic: f64,
    #[serde(default)]
    pub notes: String,
}

impl ComparisonRow {
    pub fn new(model: impl Into<String>, k: usize, loglik: f64, notes: impl Into<String>) -> Self {
        ComparisonRow {
            model: model.into(),
            k,
            loglik,
            aic: aic(loglik, k),
            notes: notes.into(),
        }
    }
}

/// Recompute each AIC and sort ascending (stable for ties).
pub fn aic_table(rows: &[ComparisonRow]) -> Vec<ComparisonRow> {
    let mut out: Vec<ComparisonRow> = rows
        .iter()
        .map(|r| ComparisonRow {
            aic: aic(r.loglik, r.k),
            ..r.clone()
        })
        .collect();
    out.sort_by(|a, b| a.aic.total_cmp(&b.aic));
    out
}

pub fn table_markdown(rows: &[ComparisonRow]) -> String {
    let mut s = String::from("| model | k | loglik | AIC | notes |\n|---|---:|---:|---:|---|\n");
    for r in rows {
        s.push_str(&format!("| {} | {} | {:.1} | {:.1} | {} |\n", r.model, r.k, r.loglik, r.aic, r.notes));
    }
    s
}
