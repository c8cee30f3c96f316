//! The five experiment commands. Each computes a report and writes it
//! under the output directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use mcot::dataset::{read_game_csv, write_game_csv, GameDataset};
use mcot::entrygame::{simulate_dgp, GameTheta};
use mcot::inference::{
    critical_rank, mc_membership_test, outer_critical_value, outer_stat, required_exceedances,
    CriticalMethod, CxSettings, InferenceData, McSettings, TestDecision,
};
use mcot::region::{compute_region, RegionResult, RegionSettings};
use mcot::rng::StreamSeeds;
use mcot::Error;

use crate::config::{config_err, named_theta, Method, RunConfig};

fn critical_method(cfg: &RunConfig, method: Method) -> CriticalMethod {
    match method {
        Method::Cx => CriticalMethod::Cx(CxSettings {
            tol: cfg.cx_tol,
            max_iterations: cfg.cx_max_iterations,
            ..CxSettings::default()
        }),
        Method::Ncx => CriticalMethod::Ncx {
            budget: cfg.ncx_budget,
        },
    }
}

fn time_cap(cfg: &RunConfig) -> Option<Duration> {
    cfg.time_cap_secs.map(Duration::from_secs_f64)
}

fn binomial_stderr(p: f64, count: usize) -> f64 {
    if count == 0 {
        return f64::NAN;
    }
    (p * (1.0 - p) / count as f64).sqrt()
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

fn load_dataset(cfg: &RunConfig) -> Result<(PathBuf, GameDataset)> {
    let path = cfg
        .data
        .clone()
        .ok_or_else(|| config_err!("this command needs a data set (--data)"))?;
    let file = fs::File::open(&path).with_context(|| format!("cannot open {}", path.display()))?;
    let data = read_game_csv(file).with_context(|| format!("reading {}", path.display()))?;
    Ok((path, data))
}

pub struct SimulateReport {
    pub data: mcot::entrygame::SimulatedData,
}

pub fn simulate(cfg: &RunConfig) -> Result<SimulateReport> {
    let game = cfg.game()?;
    let truth = GameTheta::from_theta(&cfg.theta_true()?)?;
    let data = simulate_dgp(&game, cfg.first_n(), &truth, cfg.selection()?, &StreamSeeds::new(cfg.seed))?;
    Ok(SimulateReport { data })
}

pub fn write_simulate(cfg: &RunConfig, report: &SimulateReport) -> Result<()> {
    ensure_dir(&cfg.out)?;
    let path = cfg.out.join("data.csv");
    let file = fs::File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
    write_game_csv(&report.data.observations, std::io::BufWriter::new(file))?;
    let multiple = report.data.multiplicity.iter().filter(|&&m| m > 1).count();
    write_json(
        &cfg.out.join("data.json"),
        &json!({
            "seed": cfg.seed,
            "n": cfg.first_n(),
            "players": cfg.players,
            "theta_true": cfg.theta_true,
            "selection": cfg.selection,
            "markets_with_multiple_equilibria": multiple,
        }),
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct AlphaDecision {
    pub alpha: f64,
    pub required: usize,
    pub accept: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodDecision {
    pub method: Method,
    /// Reason the method could not run, e.g. an exhausted selection budget.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unavailable: Option<String>,
    pub t_n: Option<f64>,
    pub exceedances: Option<usize>,
    pub tau_fraction: Option<f64>,
    pub undecided_draws: usize,
    pub timed_out: bool,
    pub decisions: Vec<AlphaDecision>,
}

fn method_decision(method: Method, outcome: mcot::Result<TestDecision>, alphas: &[f64]) -> Result<MethodDecision> {
    match outcome {
        Ok(d) => Ok(MethodDecision {
            method,
            unavailable: None,
            t_n: Some(d.t_n),
            exceedances: Some(d.exceedances()),
            tau_fraction: Some(d.tau_fraction()),
            undecided_draws: d.undecided,
            timed_out: d.timed_out,
            decisions: alphas
                .iter()
                .map(|&alpha| AlphaDecision {
                    alpha,
                    required: required_exceedances(d.tau.len(), alpha),
                    accept: d.accept_at(alpha),
                })
                .collect(),
        }),
        Err(e @ Error::BudgetExceeded { .. }) => Ok(MethodDecision {
            method,
            unavailable: Some(e.to_string()),
            t_n: None,
            exceedances: None,
            tau_fraction: None,
            undecided_draws: 0,
            timed_out: false,
            decisions: Vec::new(),
        }),
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TestReport {
    pub data: PathBuf,
    pub n: usize,
    pub draws: usize,
    pub seed: u64,
    pub lambda_x: f64,
    pub theta: std::collections::BTreeMap<String, f64>,
    pub methods: Vec<MethodDecision>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_secs: Option<f64>,
}

pub fn test(cfg: &RunConfig) -> Result<TestReport> {
    let started = Instant::now();
    let (path, dataset) = load_dataset(cfg)?;
    let game = dataset.game()?;
    let values = cfg.theta.clone().unwrap_or_else(|| cfg.theta_true.clone());
    let theta = named_theta(&game, &values, "theta")?;
    let ctx = InferenceData::new(&game, &dataset.observations, cfg.metric()?)?;
    let methods = cfg
        .methods
        .iter()
        .map(|&method| {
            let settings = McSettings {
                method: critical_method(cfg, method),
                time_cap: time_cap(cfg),
                ..McSettings::new(cfg.draws, cfg.alpha[0], StreamSeeds::new(cfg.seed))
            };
            method_decision(method, mc_membership_test(&ctx, &theta, &settings), &cfg.alpha)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TestReport {
        data: path,
        n: dataset.observations.len(),
        draws: cfg.draws,
        seed: cfg.seed,
        lambda_x: cfg.lambda_x,
        theta: values,
        methods,
        wall_time_secs: cfg.timings.then(|| started.elapsed().as_secs_f64()),
    })
}

pub fn write_test(cfg: &RunConfig, report: &TestReport) -> Result<()> {
    ensure_dir(&cfg.out)?;
    write_json(&cfg.out.join("test.json"), report)
}

pub fn region(cfg: &RunConfig) -> Result<RegionResult> {
    let started = Instant::now();
    let grid = cfg.grid()?;
    let (_, dataset) = load_dataset(cfg)?;
    let game = dataset.game()?;
    let ctx = InferenceData::new(&game, &dataset.observations, cfg.metric()?)?;
    let settings = RegionSettings {
        method: critical_method(cfg, cfg.methods[0]),
        time_cap: time_cap(cfg),
        ..RegionSettings::new(cfg.draws, cfg.alpha[0], StreamSeeds::new(cfg.seed))
    };
    let mut result = compute_region(&grid, &ctx, &settings).map_err(|e| match e {
        Error::InvalidParameter(msg) => config_err!("{msg}"),
        other => other.into(),
    })?;
    result.meta.wall_time_secs = cfg.timings.then(|| started.elapsed().as_secs_f64());
    Ok(result)
}

pub fn write_region(cfg: &RunConfig, result: &RegionResult) -> Result<()> {
    ensure_dir(&cfg.out)?;
    let path = cfg.out.join("region.csv");
    let file = fs::File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
    result.write_csv(std::io::BufWriter::new(file))?;
    let mut meta = serde_json::to_value(&result.meta)?;
    meta["method"] = serde_json::to_value(cfg.methods[0])?;
    write_json(&cfg.out.join("region.json"), &meta)
}

/// Outcome of one replication of one method.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationOutcome {
    pub n: usize,
    pub replication: usize,
    pub method: Method,
    /// `None` when the method was unavailable for this replication.
    pub exceedances: Option<usize>,
    pub t_n: f64,
    pub undecided: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverageRow {
    pub n: usize,
    pub alpha: f64,
    pub level: f64,
    pub method: Method,
    pub coverage: f64,
    pub replications: usize,
    pub evaluated: usize,
    pub stderr: f64,
}

#[derive(Debug, Clone)]
pub struct CoverageReport {
    pub rows: Vec<CoverageRow>,
    pub replications: Vec<ReplicationOutcome>,
    pub wall_time_secs: Option<f64>,
}

fn replication_seeds(cfg: &RunConfig, n_index: usize, r: usize) -> StreamSeeds {
    // Sample sizes get disjoint replication streams.
    StreamSeeds::new(cfg.seed).replication((n_index as u64) << 32 | r as u64)
}

pub fn coverage(cfg: &RunConfig) -> Result<CoverageReport> {
    let started = Instant::now();
    let game = cfg.game()?;
    let theta = cfg.theta_true()?;
    let truth = GameTheta::from_theta(&theta)?;
    let selection = cfg.selection()?;
    let metric = cfg.metric()?;
    let jobs: Vec<(usize, usize)> = (0..cfg.n.len())
        .flat_map(|k| (0..cfg.replications).map(move |r| (k, r)))
        .collect();
    let per_job = jobs
        .par_iter()
        .map(|&(k, r)| -> Result<Vec<ReplicationOutcome>> {
            let n = cfg.n[k];
            let seeds = replication_seeds(cfg, k, r);
            let data = simulate_dgp(&game, n, &truth, selection, &seeds)?;
            let ctx = InferenceData::new(&game, &data.observations, metric)?;
            cfg.methods
                .iter()
                .map(|&method| {
                    let settings = McSettings {
                        method: critical_method(cfg, method),
                        time_cap: time_cap(cfg),
                        ..McSettings::new(cfg.draws, cfg.alpha[0], seeds)
                    };
                    let (exceedances, t_n, undecided) = match mc_membership_test(&ctx, &theta, &settings) {
                        Ok(d) => (Some(d.exceedances()), d.t_n, d.undecided),
                        Err(Error::BudgetExceeded { .. }) => (None, f64::NAN, 0),
                        Err(e) => return Err(e.into()),
                    };
                    Ok(ReplicationOutcome {
                        n,
                        replication: r,
                        method,
                        exceedances,
                        t_n,
                        undecided,
                    })
                })
                .collect()
        })
        .collect::<Vec<_>>();
    let replications: Vec<ReplicationOutcome> = per_job
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let mut rows = Vec::new();
    for &n in &cfg.n {
        for &alpha in &cfg.alpha {
            let required = required_exceedances(cfg.draws, alpha);
            for &method in &cfg.methods {
                let outcomes: Vec<usize> = replications
                    .iter()
                    .filter(|o| o.n == n && o.method == method)
                    .filter_map(|o| o.exceedances)
                    .collect();
                let covered = outcomes.iter().filter(|&&e| e >= required).count();
                let evaluated = outcomes.len();
                let p = if evaluated == 0 { f64::NAN } else { covered as f64 / evaluated as f64 };
                rows.push(CoverageRow {
                    n,
                    alpha,
                    level: 1.0 - alpha,
                    method,
                    coverage: p,
                    replications: cfg.replications,
                    evaluated,
                    stderr: binomial_stderr(p, evaluated),
                });
            }
        }
    }
    Ok(CoverageReport {
        rows,
        replications,
        wall_time_secs: cfg.timings.then(|| started.elapsed().as_secs_f64()),
    })
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Cx => "cx",
        Method::Ncx => "ncx",
    }
}

fn opt_string<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_coverage(cfg: &RunConfig, report: &CoverageReport) -> Result<()> {
    ensure_dir(&cfg.out)?;
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.alpha.to_string(),
                r.level.to_string(),
                method_name(r.method).to_string(),
                r.coverage.to_string(),
                r.replications.to_string(),
                r.evaluated.to_string(),
                r.stderr.to_string(),
            ]
        })
        .collect();
    write_csv(
        &cfg.out.join("coverage.csv"),
        &["n", "alpha", "level", "method", "coverage", "replications", "evaluated", "stderr"],
        &rows,
    )?;
    let detail: Vec<Vec<String>> = report
        .replications
        .iter()
        .map(|o| {
            vec![
                o.n.to_string(),
                o.replication.to_string(),
                method_name(o.method).to_string(),
                o.t_n.to_string(),
                opt_string(o.exceedances),
                o.undecided.to_string(),
            ]
        })
        .collect();
    write_csv(
        &cfg.out.join("coverage_replications.csv"),
        &["n", "replication", "method", "t_n", "exceedances", "undecided"],
        &detail,
    )?;
    let mut meta = json!({ "config": cfg, "table": report.rows });
    if let Some(t) = report.wall_time_secs {
        meta["wall_time_secs"] = json!(t);
    }
    write_json(&cfg.out.join("coverage.json"), &meta)
}

#[derive(Debug, Clone, Serialize)]
pub struct PowerRow {
    pub n: usize,
    pub alpha: f64,
    pub replications: usize,
    pub rejections: usize,
    pub rejection_rate: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone)]
pub struct PowerReport {
    pub rows: Vec<PowerRow>,
    pub wall_time_secs: Option<f64>,
}

/// Rejection frequency of `theta_alt` by the outer test.
pub fn power(cfg: &RunConfig) -> Result<PowerReport> {
    let started = Instant::now();
    let game = cfg.game()?;
    let truth = GameTheta::from_theta(&cfg.theta_true()?)?;
    let alt_values = cfg
        .theta_alt
        .as_ref()
        .ok_or_else(|| config_err!("power needs theta_alt (--theta-alt)"))?;
    let alt = named_theta(&game, alt_values, "theta_alt")?;
    let selection = cfg.selection()?;
    let metric = cfg.metric()?;
    let jobs: Vec<(usize, usize)> = (0..cfg.n.len())
        .flat_map(|k| (0..cfg.replications).map(move |r| (k, r)))
        .collect();
    // Per job: T*(theta_alt) and the sorted draws of the outer critical value.
    let results = jobs
        .par_iter()
        .map(|&(k, r)| -> Result<(f64, Vec<f64>)> {
            let seeds = replication_seeds(cfg, k, r);
            let data = simulate_dgp(&game, cfg.n[k], &truth, selection, &seeds)?;
            let ctx = InferenceData::new(&game, &data.observations, metric)?;
            let critical = outer_critical_value(&game, ctx.covariates(), &metric, cfg.draws, cfg.alpha[0], &seeds)?;
            let mut draws = critical.draws;
            draws.sort_by(f64::total_cmp);
            Ok((outer_stat(&ctx, &alt, &seeds)?, draws))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for (k, &n) in cfg.n.iter().enumerate() {
        let mine = &results[k * cfg.replications..(k + 1) * cfg.replications];
        for &alpha in &cfg.alpha {
            let rank = critical_rank(cfg.draws, alpha);
            let rejections = mine.iter().filter(|(t, draws)| *t > draws[rank - 1]).count();
            let rate = rejections as f64 / cfg.replications as f64;
            rows.push(PowerRow {
                n,
                alpha,
                replications: cfg.replications,
                rejections,
                rejection_rate: rate,
                stderr: binomial_stderr(rate, cfg.replications),
            });
        }
    }
    Ok(PowerReport {
        rows,
        wall_time_secs: cfg.timings.then(|| started.elapsed().as_secs_f64()),
    })
}

pub fn write_power(cfg: &RunConfig, report: &PowerReport) -> Result<()> {
    ensure_dir(&cfg.out)?;
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.alpha.to_string(),
                r.replications.to_string(),
                r.rejections.to_string(),
                r.rejection_rate.to_string(),
                r.stderr.to_string(),
            ]
        })
        .collect();
    write_csv(
        &cfg.out.join("power.csv"),
        &["n", "alpha", "replications", "rejections", "rejection_rate", "stderr"],
        &rows,
    )?;
    let mut meta = json!({ "config": cfg, "table": report.rows });
    if let Some(t) = report.wall_time_secs {
        meta["wall_time_secs"] = json!(t);
    }
    write_json(&cfg.out.join("power.json"), &meta)
}
