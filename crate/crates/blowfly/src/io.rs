//! Reading observation files and writing plot-ready CSV.

use std::fs;
use std::path::Path;

use blowfly_core::blowfly::simulate;
use blowfly_core::data::ObservationSeries;
use blowfly_core::{BlowflyParams, DelayState, Trajectory};

use crate::{CliError, Result};

/// Load a `day,count` CSV file.
pub fn load_series(path: &Path) -> Result<ObservationSeries> {
    if !path.is_file() {
        return Err(CliError::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ObservationSeries::parse_csv(&text).map_err(|source| CliError::Core {
        path: path.to_path_buf(),
        source,
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    }
}

/// Write a series in the `day,count` format it is read from.
pub fn write_series(path: &Path, series: &ObservationSeries) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["day", "count"]).map_err(csv_err(path))?;
    for (day, count) in series.times().iter().zip(series.counts()) {
        w.write_record([day.to_string(), count.to_string()]).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// `day,N,y`, one row per process step after the initial state; `y` is
/// empty between observation days.
pub fn write_trajectory(path: &Path, trajectory: &Trajectory) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["day", "N", "y"]).map_err(csv_err(path))?;
    for i in 1..trajectory.times.len() {
        let y = trajectory
            .observations
            .as_ref()
            .and_then(|o| o[i])
            .map(|y| y.to_string())
            .unwrap_or_default();
        w.write_record([trajectory.times[i].to_string(), format!("{}", trajectory.states[i]), y])
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// `day,N_skeleton` for every skeleton step including the start.
pub fn write_skeleton(path: &Path, path_points: &[(u32, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["day", "N_skeleton"]).map_err(csv_err(path))?;
    for (day, n) in path_points {
        w.write_record([day.to_string(), format!("{n}")]).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Simulated observation series: the process is started at day 0 from
/// `init`, and the measurements at days `2, 4, …, 2·n_obs` form the series.
pub fn simulated_series(params: &BlowflyParams, init: &DelayState, n_obs: usize, seed: u64) -> Result<ObservationSeries> {
    let init = DelayState { time: 0, ..init.clone() };
    let steps = n_obs * params.steps_per_observation() as usize;
    let path = simulate(params, &init, steps, seed, true)?;
    let obs = path.observations.unwrap_or_default();
    let (times, counts): (Vec<u32>, Vec<u64>) = path
        .times
        .iter()
        .zip(obs)
        .filter_map(|(t, y)| y.map(|y| (*t, y)))
        .unzip();
    Ok(ObservationSeries::new(times, counts)?)
}
