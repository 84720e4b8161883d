//! Observation series, the eight-point initialization window and the
//! construction of the initial delay state.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[allow(unused_imports)]
use crate::fmath::*;
use crate::model::{check_step, DelayState, OBSERVATION_INTERVAL};
use crate::{Error, Result};

/// Observations used to build the initial state.
pub const INIT_LEN: usize = 8;

/// Bi-daily adult counts `y_1..y_T` at days `t_k = 2k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationSeries {
    times: Vec<u32>,
    counts: Vec<u64>,
}

impl ObservationSeries {
    /// Validate `(day, count)` pairs: constant 2-day spacing and at least
    /// nine observations.
    pub fn new(times: Vec<u32>, counts: Vec<u64>) -> Result<Self> {
        if times.len() != counts.len() {
            return Err(Error::InvalidConfig("times and counts differ in length".into()));
        }
        for (i, w) in times.windows(2).enumerate() {
            if w[1] != w[0] + OBSERVATION_INTERVAL {
                // +2: header line and 1-based numbering
                return Err(Error::NonUniformSpacing { line: i + 3 });
            }
        }
        if counts.len() < INIT_LEN + 1 {
            return Err(Error::SeriesTooShort { len: counts.len() });
        }
        Ok(ObservationSeries { times, counts })
    }

    /// Counts at days 2, 4, 6, ...
    pub fn from_counts(counts: Vec<u64>) -> Result<Self> {
        let times = (1..=counts.len() as u32).map(|k| OBSERVATION_INTERVAL * k).collect();
        ObservationSeries::new(times, counts)
    }

    /// Parse the `day,count` CSV format (header required, integer fields).
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim().trim_start_matches('\u{feff}') == "day,count" => {}
            _ => {
                return Err(Error::MalformedRow {
                    line: 1,
                    reason: "expected header `day,count`".to_string(),
                })
            }
        }
        let mut times = Vec::new();
        let mut counts = Vec::new();
        for (i, raw) in lines {
            let line = i + 1;
            let row = raw.trim_end_matches('\r');
            if row.trim().is_empty() {
                continue;
            }
            let mut fields = row.split(',');
            let (Some(day), Some(count), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(Error::MalformedRow {
                    line,
                    reason: "expected two fields".to_string(),
                });
            };
            let day: u32 = day.trim().parse().map_err(|_| Error::MalformedRow {
                line,
                reason: format!("day `{}` is not a non-negative integer", day.trim()),
            })?;
            let count = count.trim();
            if let Some(rest) = count.strip_prefix('-') {
                if rest.parse::<u64>().is_ok() {
                    return Err(Error::NegativeCount { line });
                }
            }
            let count: u64 = count.parse().map_err(|_| Error::MalformedRow {
                line,
                reason: format!("count `{count}` is not an integer"),
            })?;
            if let Some(&prev) = times.last() {
                if day != prev + OBSERVATION_INTERVAL {
                    return Err(Error::NonUniformSpacing { line });
                }
            }
            times.push(day);
            counts.push(count);
        }
        ObservationSeries::new(times, counts)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn times(&self) -> &[u32] {
        &self.times
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn init_window(&self) -> InitWindow {
        let mut history = [(0u32, 0u64); INIT_LEN];
        for (k, h) in history.iter_mut().enumerate() {
            *h = (self.times[k], self.counts[k]);
        }
        InitWindow { history }
    }

    /// Counts `y_9..y_T`, the observations the models are fitted to.
    pub fn fit_window(&self) -> &[u64] {
        &self.counts[INIT_LEN..]
    }

    pub fn fit_window_f64(&self) -> Vec<f64> {
        self.fit_window().iter().map(|&y| y as f64).collect()
    }
}

/// The first eight observations, which fix the state at `t_8`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitWindow {
    pub history: [(u32, u64); INIT_LEN],
}

impl InitWindow {
    pub fn anchor_time(&self) -> u32 {
        self.history[INIT_LEN - 1].0
    }
}

/// Natural cubic spline (zero second derivative at both ends).
#[derive(Clone, Debug)]
pub struct NaturalCubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    second: Vec<f64>,
}

impl NaturalCubicSpline {
    /// Knots must be strictly increasing; at least two.
    pub fn new(xs: &[f64], ys: &[f64]) -> Self {
        let n = xs.len();
        assert!(n >= 2 && ys.len() == n);
        let mut second = alloc::vec![0.0; n];
        if n > 2 {
            // Tridiagonal system for interior second derivatives (Thomas algorithm).
            let m = n - 2;
            let mut diag = alloc::vec![0.0; m];
            let mut upper = alloc::vec![0.0; m];
            let mut rhs = alloc::vec![0.0; m];
            for i in 0..m {
                let h0 = xs[i + 1] - xs[i];
                let h1 = xs[i + 2] - xs[i + 1];
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = 6.0 * ((ys[i + 2] - ys[i + 1]) / h1 - (ys[i + 1] - ys[i]) / h0);
            }
            for i in 1..m {
                let lower = xs[i + 1] - xs[i];
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            let mut sol = alloc::vec![0.0; m];
            sol[m - 1] = rhs[m - 1] / diag[m - 1];
            for i in (0..m - 1).rev() {
                sol[i] = (rhs[i] - upper[i] * sol[i + 1]) / diag[i];
            }
            second[1..n - 1].copy_from_slice(&sol);
        }
        NaturalCubicSpline {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            second,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let i = match self.xs.iter().rposition(|&k| k <= x) {
            Some(i) if i >= n - 1 => n - 2,
            Some(i) => i,
            None => 0,
        };
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        a * self.ys[i]
            + b * self.ys[i + 1]
            + ((a * a * a - a) * self.second[i] + (b * b * b - b) * self.second[i + 1]) * h * h / 6.0
    }
}

/// Build `X(t_8) = (N(t_8), N(t_8-Δ), ..., N(t_8-τ))`.
///
/// With `delta == 2` the counts are copied directly; otherwise the natural
/// cubic spline through the window is evaluated, rounded half-up and clamped
/// at zero.
pub fn initial_state(window: &InitWindow, delta: u32, tau: u32) -> Result<DelayState> {
    check_step(delta, tau)?;
    let anchor = window.anchor_time();
    let first = window.history[0].0;
    if tau > anchor - first {
        return Err(Error::WindowTooShort { tau });
    }
    let lags = (tau / delta) as usize;
    let values: Vec<u64> = if delta == OBSERVATION_INTERVAL {
        (0..=lags).map(|j| window.history[INIT_LEN - 1 - j].1).collect()
    } else {
        let xs: Vec<f64> = window.history.iter().map(|h| h.0 as f64).collect();
        let ys: Vec<f64> = window.history.iter().map(|h| h.1 as f64).collect();
        let spline = NaturalCubicSpline::new(&xs, &ys);
        (0..=lags)
            .map(|j| {
                let v = spline.eval(anchor as f64 - (j as u32 * delta) as f64);
                (v + 0.5).floor().max(0.0) as u64
            })
            .collect()
    };
    Ok(DelayState::new(&values, anchor))
}
