//! Command-line interface: argument parsing and the seven subcommands.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use blowfly_core::arma::{arma_fit, arma_loglik, ArmaFitOptions, ArmaParams};
use blowfly_core::blowfly::{simulate, skeleton_fixed_point, skeleton_trajectory, BlowflyModel, XTParams};
use blowfly_core::criteria::{
    aic_table, ape1_params, ape_fit, ape_t_params, chisq_compare, derived_quantities, table_markdown,
    xt_gaussian_loglik, ApeConfig, ComparisonRow, XT_PARAM_COUNT,
};
use blowfly_core::data::initial_state;
use blowfly_core::mif::{jittered_starts, mif_restarts, MifConfig, MifTrace};
use blowfly_core::model::BLOWFLY_PARAM_NAMES;
use blowfly_core::smc::replicate_loglik;
use blowfly_core::{BlowflyParams, DelayState};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::io::{load_series, write_series, write_skeleton, write_trajectory};
use crate::results::{git_describe, read_params, read_result, write_result, ResultFile, SCHEMA_VERSION};
use crate::{CliError, Result};

#[derive(Parser, Debug, Serialize)]
#[command(name = "blowfly", version, about = "Nicholson blowfly POMP simulation and inference")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Serialize)]
pub struct Global {
    /// Observation file with a `day,count` header.
    #[arg(long, global = true, default_value = "data/blowflies.csv")]
    pub data: PathBuf,
    /// Random seed; required so that every run is reproducible.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for result files.
    #[arg(long, global = true, default_value = "results")]
    pub out: PathBuf,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Scale of the log-ARMA likelihood: `count` adds the Jacobian of the
    /// log transform, `log` reports the density of the log counts.
    #[arg(long, global = true, value_enum, default_value_t = LoglikScale::Count)]
    pub loglik_scale: LoglikScale,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoglikScale {
    Count,
    Log,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Simulate the stochastic model and write `day,N,y`.
    Simulate(SimulateArgs),
    /// Iterate the deterministic skeleton and write `day,N_skeleton`.
    Skeleton(SkeletonArgs),
    /// Replicated particle-filter log-likelihood on the data.
    Pfilter(PfilterArgs),
    /// Iterated-filtering maximum likelihood on the data.
    Mif(MifArgs),
    /// Exact log-ARMA(p, q) likelihood and fit.
    Arma(ArmaArgs),
    /// Xia–Tong NLAR Gaussian likelihoods and APE fits.
    Nlar(NlarArgs),
    /// AIC table and chi-squared reports from earlier result files.
    Compare(CompareArgs),
}

/// Parameter file plus per-field overrides; unspecified fields fall back to
/// the published maximum-likelihood values.
#[derive(Args, Debug, Clone, Serialize)]
pub struct ParamArgs {
    /// JSON file with fields P, N0, delta_rate, sigma_p, sigma_d, sigma_y, delta, tau.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long = "P")]
    pub p: Option<f64>,
    #[arg(long = "N0")]
    pub n0: Option<f64>,
    #[arg(long)]
    pub delta_rate: Option<f64>,
    #[arg(long)]
    pub sigma_p: Option<f64>,
    #[arg(long)]
    pub sigma_d: Option<f64>,
    #[arg(long)]
    pub sigma_y: Option<f64>,
    /// Euler step in days.
    #[arg(long)]
    pub delta: Option<u32>,
    /// Maturation delay in days.
    #[arg(long)]
    pub tau: Option<u32>,
}

impl ParamArgs {
    pub fn resolve(&self) -> Result<BlowflyParams> {
        let mut p = match &self.params {
            Some(path) => read_params::<BlowflyParams>(path)?,
            None => BlowflyParams::published_mle(),
        };
        let fields: [(&mut f64, Option<f64>); 6] = [
            (&mut p.p, self.p),
            (&mut p.n0, self.n0),
            (&mut p.delta_rate, self.delta_rate),
            (&mut p.sigma_p, self.sigma_p),
            (&mut p.sigma_d, self.sigma_d),
            (&mut p.sigma_y, self.sigma_y),
        ];
        for (slot, value) in fields {
            if let Some(v) = value {
                *slot = v;
            }
        }
        if let Some(d) = self.delta {
            p.delta = d;
        }
        if let Some(t) = self.tau {
            p.tau = t;
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Args, Debug, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Euler steps to simulate.
    #[arg(long, default_value_t = 400)]
    pub steps: usize,
    /// Constant initial count used when the data file is absent.
    #[arg(long, default_value_t = 1000)]
    pub init_count: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct SkeletonArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, default_value_t = 400)]
    pub steps: usize,
    /// Start from N = 1 throughout the delay window instead of the data.
    #[arg(long)]
    pub ones: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct PfilterArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Particles per filter.
    #[arg(short = 'J', long, default_value_t = 10_000)]
    pub particles: usize,
    /// Independent replicate filters.
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct MifArgs {
    /// Starting parameters (same format as --params); defaults to the
    /// published estimate.
    #[arg(long)]
    pub start: Option<PathBuf>,
    #[arg(long)]
    pub delta: Option<u32>,
    #[arg(long)]
    pub tau: Option<u32>,
    #[arg(short = 'J', long, default_value_t = 5000)]
    pub particles: usize,
    #[arg(short = 'M', long, default_value_t = 60)]
    pub iterations: usize,
    /// Random-walk standard deviation on the log scale, all parameters.
    #[arg(long, default_value_t = 0.02)]
    pub rw_sd: f64,
    #[arg(long, default_value_t = 0.95)]
    pub cooling: f64,
    /// Number of searches; the first starts exactly at --start.
    #[arg(long, default_value_t = 5)]
    pub restarts: usize,
    /// Half-width of the uniform log-scale jitter applied to later starts.
    #[arg(long, default_value_t = 0.25)]
    pub spread: f64,
    #[arg(long, default_value_t = 5000)]
    pub eval_particles: usize,
    #[arg(long, default_value_t = 10)]
    pub eval_reps: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct ArmaArgs {
    #[arg(short = 'p', default_value_t = 2)]
    pub p: usize,
    #[arg(short = 'q', default_value_t = 2)]
    pub q: usize,
    #[arg(long, default_value_t = 20)]
    pub restarts: usize,
    /// Evaluate these parameters (fields ar, ma, intercept, var) instead of fitting.
    #[arg(long)]
    pub params: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct NlarArgs {
    /// Additional parameter file (fields c, alpha, N0_xt, nu, tau, sigma2).
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Also fit by minimizing the APE criterion.
    #[arg(long)]
    pub fit: bool,
    /// Maximum prediction horizon (bi-daily steps) of the APE criterion.
    #[arg(long, default_value_t = 1)]
    pub horizon: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct CompareArgs {
    /// Result files; defaults to every `*.json` in --out except compare.json.
    pub inputs: Vec<PathBuf>,
    /// Degrees of freedom for the chi-squared reports; defaults to the
    /// larger parameter count of each pair.
    #[arg(long)]
    pub df: Option<u32>,
}

struct Outcome {
    name: String,
    result: Value,
    comparison: Vec<ComparisonRow>,
}

fn require_seed(global: &Global) -> Result<u64> {
    global
        .seed
        .ok_or_else(|| CliError::Config("--seed is required; runs never draw a random seed".into()))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn named(names: &[String], values: &[f64]) -> Value {
    Value::Object(names.iter().cloned().zip(values.iter().map(|v| json!(v))).collect())
}

/// Parse arguments from the process and run.
pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(path) => {
            println!("wrote {}", path.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Run a parsed command; returns the path of the JSON result file.
pub fn run(cli: &Cli) -> Result<PathBuf> {
    let seed = require_seed(&cli.global)?;
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        // A second call in the same process keeps the existing pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    ensure_dir(&cli.global.out)?;
    let started = Instant::now();
    let g = &cli.global;
    let outcome = match &cli.command {
        Command::Simulate(a) => cmd_simulate(g, seed, a)?,
        Command::Skeleton(a) => cmd_skeleton(g, a)?,
        Command::Pfilter(a) => cmd_pfilter(g, seed, a)?,
        Command::Mif(a) => cmd_mif(g, seed, a)?,
        Command::Arma(a) => cmd_arma(g, seed, a)?,
        Command::Nlar(a) => cmd_nlar(g, a)?,
        Command::Compare(a) => cmd_compare(g, a)?,
    };
    let record = ResultFile {
        schema_version: SCHEMA_VERSION,
        command: command_name(&cli.command).into(),
        seed,
        config: serde_json::to_value(cli).expect("arguments serialize"),
        git_describe: git_describe(),
        runtime_seconds: started.elapsed().as_secs_f64(),
        result: outcome.result,
        comparison: outcome.comparison,
    };
    let path = cli.global.out.join(format!("{}.json", outcome.name));
    write_result(&path, &record)?;
    read_result(&path)?;
    Ok(path)
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Simulate(_) => "simulate",
        Command::Skeleton(_) => "skeleton",
        Command::Pfilter(_) => "pfilter",
        Command::Mif(_) => "mif",
        Command::Arma(_) => "arma",
        Command::Nlar(_) => "nlar",
        Command::Compare(_) => "compare",
    }
}

fn cmd_simulate(g: &Global, seed: u64, a: &SimulateArgs) -> Result<Outcome> {
    let params = a.params.resolve()?;
    let (init, init_source) = if g.data.is_file() {
        let series = load_series(&g.data)?;
        (initial_state(&series.init_window(), params.delta, params.tau)?, "data")
    } else {
        (DelayState::new(&vec![a.init_count; params.buffer_len()], 0), "constant")
    };
    let path = simulate(&params, &init, a.steps, seed, true)?;
    let csv = g.out.join("simulate.csv");
    write_trajectory(&csv, &path)?;
    let n_obs = path.observations.as_ref().map_or(0, |o| o.iter().flatten().count());
    println!("simulated {} steps ({} observations) from a {init_source} start", a.steps, n_obs);
    Ok(Outcome {
        name: "simulate".into(),
        result: json!({
            "params": params,
            "init_source": init_source,
            "steps": a.steps,
            "observations": n_obs,
            "csv": csv,
        }),
        comparison: vec![],
    })
}

fn cmd_skeleton(g: &Global, a: &SkeletonArgs) -> Result<Outcome> {
    let params = a.params.resolve()?;
    let series = if a.ones { None } else { Some(load_series(&g.data)?) };
    let init = match &series {
        Some(s) => initial_state(&s.init_window(), params.delta, params.tau)?.to_real(),
        None => DelayState::new(&vec![1.0; params.buffer_len()], 0),
    };
    let path = skeleton_trajectory(&params, &init, a.steps);
    let csv = g.out.join("skeleton.csv");
    write_skeleton(&csv, &path)?;
    if let Some(s) = &series {
        write_series(&g.out.join("data.csv"), s)?;
    }
    let tail = &path[path.len() / 2..];
    let max = tail.iter().map(|p| p.1).fold(f64::MIN, f64::max);
    let min = tail.iter().map(|p| p.1).fold(f64::MAX, f64::min);
    let fixed_point = skeleton_fixed_point(&params);
    println!("skeleton max/min over second half: {:.3}", max / min);
    Ok(Outcome {
        name: "skeleton".into(),
        result: json!({
            "params": params,
            "steps": a.steps,
            "fixed_point": fixed_point,
            "second_half_max": max,
            "second_half_min": min,
            "csv": csv,
        }),
        comparison: vec![],
    })
}

fn pomp_label(delta: u32) -> String {
    format!("pomp(delta={delta})")
}

fn cmd_pfilter(g: &Global, seed: u64, a: &PfilterArgs) -> Result<Outcome> {
    let params = a.params.resolve()?;
    let series = load_series(&g.data)?;
    let model = BlowflyModel::from_series(&series, params.delta, params.tau)?;
    let est = replicate_loglik(&model, &params.estimated(), &series.fit_window_f64(), a.particles, a.reps, seed)?;
    println!("loglik {:.2} (se {:.2})", est.loglik, est.se);
    Ok(Outcome {
        name: format!("pfilter_delta{}", params.delta),
        result: json!({
            "params": params,
            "J": a.particles,
            "reps": a.reps,
            "loglik": est.loglik,
            "loglik_se": est.se,
            "replicates": est.replicates,
            "seeds": est.seeds,
        }),
        comparison: vec![ComparisonRow::new(
            pomp_label(params.delta),
            BLOWFLY_PARAM_NAMES.len(),
            est.loglik,
            format!("pfilter J={} reps={} se={:.2}", a.particles, a.reps, est.se),
        )],
    })
}

fn write_trace(path: &Path, trace: &MifTrace) -> Result<()> {
    let err = |e: csv::Error| CliError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(["iteration", "loglik", "P", "N0", "delta", "sigma_p", "sigma_d", "sigma_y"])
        .map_err(err)?;
    for it in &trace.iterations {
        let mut row = vec![it.iteration.to_string(), format!("{}", it.loglik)];
        row.extend(it.params.iter().map(|v| format!("{v}")));
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn cmd_mif(g: &Global, seed: u64, a: &MifArgs) -> Result<Outcome> {
    let mut start = match &a.start {
        Some(path) => read_params::<BlowflyParams>(path)?,
        None => BlowflyParams::published_mle(),
    };
    if let Some(d) = a.delta {
        start.delta = d;
    }
    if let Some(t) = a.tau {
        start.tau = t;
    }
    start.validate()?;
    if a.restarts == 0 {
        return Err(CliError::Config("--restarts must be at least 1".into()));
    }
    let series = load_series(&g.data)?;
    let model = BlowflyModel::from_series(&series, start.delta, start.tau)?;
    let config = MifConfig {
        particles: a.particles,
        iterations: a.iterations,
        rw_sd: vec![a.rw_sd; BLOWFLY_PARAM_NAMES.len()],
        cooling_factor: a.cooling,
        seed,
        eval_particles: a.eval_particles,
        eval_replicates: a.eval_reps,
    };
    let starts = jittered_starts(&model, &start.estimated(), a.restarts, a.spread, seed)?;
    let (best, traces) = mif_restarts(&model, &series.fit_window_f64(), &starts, &config)?;
    let mut trace_files = Vec::new();
    for (i, t) in traces.iter().enumerate() {
        let path = g.out.join(format!("mif_delta{}_trace{i}.csv", start.delta));
        write_trace(&path, t)?;
        trace_files.push(path);
    }
    let b = &traces[best];
    let names = b.param_names.clone();
    println!("best restart {best}: loglik {:.2} (se {:.2})", b.final_loglik, b.final_loglik_se);
    Ok(Outcome {
        name: format!("mif_delta{}", start.delta),
        result: json!({
            "delta": start.delta,
            "tau": start.tau,
            "mif": config,
            "best": best,
            "params": named(&names, &b.final_params),
            "loglik": b.final_loglik,
            "loglik_se": b.final_loglik_se,
            "restarts": traces.iter().map(|t| json!({
                "start": named(&names, &t.start),
                "final": named(&names, &t.final_params),
                "loglik": t.final_loglik,
                "loglik_se": t.final_loglik_se,
            })).collect::<Vec<_>>(),
            "traces": trace_files,
        }),
        comparison: vec![ComparisonRow::new(
            pomp_label(start.delta),
            BLOWFLY_PARAM_NAMES.len(),
            b.final_loglik,
            format!("mif J={} M={} restarts={} se={:.2}", a.particles, a.iterations, a.restarts, b.final_loglik_se),
        )],
    })
}

fn cmd_arma(g: &Global, seed: u64, a: &ArmaArgs) -> Result<Outcome> {
    let series = load_series(&g.data)?;
    let counts = series.fit_window();
    let adjust = g.loglik_scale == LoglikScale::Count;
    let (params, loglik, k) = match &a.params {
        Some(path) => {
            let params: ArmaParams = read_params(path)?;
            let ll = arma_loglik(&params, counts, adjust)?;
            let k = params.ar.len() + params.ma.len() + 2;
            (params, ll, k)
        }
        None => {
            let fit = arma_fit(counts, a.p, a.q, &ArmaFitOptions { restarts: a.restarts, seed, log_scale_adjust: adjust })?;
            (fit.params, fit.fit.loglik, fit.fit.k)
        }
    };
    let (p, q) = (params.ar.len(), params.ma.len());
    let aic = blowfly_core::model::aic(loglik, k);
    println!("log-ARMA({p},{q}) loglik {loglik:.2}, AIC {aic:.2}");
    Ok(Outcome {
        name: format!("arma_{p}_{q}"),
        result: json!({
            "model": "log-arma",
            "p": p,
            "q": q,
            "ar": params.ar,
            "ma": params.ma,
            "intercept": params.intercept,
            "var": params.var,
            "loglik": loglik,
            "loglik_scale": g.loglik_scale,
            "aic": aic,
        }),
        comparison: vec![ComparisonRow::new(
            format!("log-arma({p},{q})"),
            k,
            loglik,
            format!("{} scale", if adjust { "count" } else { "log" }),
        )],
    })
}

fn cmd_nlar(g: &Global, a: &NlarArgs) -> Result<Outcome> {
    let series = load_series(&g.data)?;
    let ys: Vec<f64> = series.counts().iter().map(|&y| y as f64).collect();
    let mut sets: Vec<(String, XTParams)> = vec![("ape1".into(), ape1_params()), ("apeT".into(), ape_t_params())];
    if let Some(path) = &a.params {
        sets.push(("file".into(), read_params(path)?));
    }
    let mut evaluated = Vec::new();
    let mut rows = Vec::new();
    for (label, params) in &sets {
        let ll = xt_gaussian_loglik(params, &ys)?;
        rows.push(ComparisonRow::new(format!("xt-gaussian({label})"), XT_PARAM_COUNT, ll, "published estimate"));
        evaluated.push(json!({
            "label": label,
            "params": params,
            "derived": derived_quantities(params),
            "loglik": ll,
        }));
        println!("{label}: loglik {ll:.2}");
    }
    let chisq = chisq_compare(rows[0].loglik, rows[1].loglik, XT_PARAM_COUNT as u32)?;
    let fit = if a.fit {
        let config = ApeConfig::uniform(a.horizon);
        let fit = ape_fit(&ys, &config, &[ape1_params(), ape_t_params()])?;
        rows.push(ComparisonRow::new(
            format!("xt-gaussian(fit M={})", a.horizon),
            XT_PARAM_COUNT,
            fit.fit.loglik,
            format!("APE objective {:.4}", fit.objective),
        ));
        println!("APE fit (M={}): loglik {:.2}", a.horizon, fit.fit.loglik);
        Some(fit)
    } else {
        None
    };
    if let Some(row) = rows.iter_mut().find(|r| r.model == "xt-gaussian(file)") {
        row.notes = "parameter file".into();
    }
    Ok(Outcome {
        name: "nlar".into(),
        result: json!({
            "evaluated": evaluated,
            "chisq_ape1_vs_apeT": chisq,
            "fit": fit,
        }),
        comparison: rows,
    })
}

fn cmd_compare(g: &Global, a: &CompareArgs) -> Result<Outcome> {
    let inputs: Vec<PathBuf> = if a.inputs.is_empty() {
        let mut found: Vec<PathBuf> = fs::read_dir(&g.out)
            .map_err(|source| CliError::Io {
                path: g.out.clone(),
                source,
            })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json") && p.file_name().is_some_and(|n| n != "compare.json"))
            .collect();
        found.sort();
        found
    } else {
        a.inputs.clone()
    };
    let mut rows = Vec::new();
    for path in &inputs {
        rows.extend(read_result(path)?.comparison);
    }
    if rows.is_empty() {
        return Err(CliError::Config("no comparison rows in the given result files".into()));
    }
    let table = aic_table(&rows);
    let mut pairs = Vec::new();
    for i in 0..table.len() {
        for j in i + 1..table.len() {
            let df = a.df.unwrap_or(table[i].k.max(table[j].k) as u32);
            pairs.push(json!({
                "a": table[i].model,
                "b": table[j].model,
                "report": chisq_compare(table[i].loglik, table[j].loglik, df)?,
            }));
        }
    }
    let md = table_markdown(&table);
    let md_path = g.out.join("compare.md");
    fs::write(&md_path, &md).map_err(|source| CliError::Io {
        path: md_path.clone(),
        source,
    })?;
    print!("{md}");
    Ok(Outcome {
        name: "compare".into(),
        result: json!({
            "inputs": inputs,
            "table": table,
            "chisq": pairs,
        }),
        comparison: vec![],
    })
}

