//! Confidence regions by test inversion over a rectangular grid.
//!
//! The outer region needs one parameter-free critical value and one
//! assignment per grid point. The Monte Carlo test then runs only at the
//! points the outer region keeps.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Duration;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::inference::{
    mc_membership_test, outer_critical_value, outer_stat, CriticalMethod, InferenceData,
    LatentSpace, McSettings,
};
use crate::model::{StructuralModel, Theta};
use crate::rng::StreamSeeds;

/// One axis of a grid, written `name:lower:upper:count`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridAxis {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

impl GridAxis {
    pub fn new(name: impl Into<String>, lower: f64, upper: f64, count: usize) -> Result<Self> {
        let name = name.into();
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(Error::InvalidParameter(format!("invalid axis name {name:?}")));
        }
        if !lower.is_finite() || !upper.is_finite() || lower > upper || !(upper - lower).is_finite() {
            return Err(Error::InvalidParameter(format!(
                "axis {name}: need finite bounds with lower <= upper"
            )));
        }
        if count == 0 {
            return Err(Error::InvalidParameter(format!("axis {name}: count must be positive")));
        }
        Ok(Self {
            name,
            lower,
            upper,
            count,
        })
    }

    /// Grid value `k` of `count`; a single-point axis sits at `lower`.
    pub fn value(&self, k: usize) -> f64 {
        if self.count == 1 {
            return self.lower;
        }
        // k / (count - 1) is exact under doubling both, so a refined axis
        // reproduces the coarse values bit for bit.
        let t = k as f64 / (self.count - 1) as f64;
        (self.lower + (self.upper - self.lower) * t).min(self.upper)
    }
}

impl FromStr for GridAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 4 {
            return Err(Error::InvalidParameter(format!(
                "grid axis {s:?} is not of the form name:lower:upper:count"
            )));
        }
        let number = |field: &str, what: &str| {
            field
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("grid axis {s:?}: bad {what}")))
        };
        let count = parts[3]
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::InvalidParameter(format!("grid axis {s:?}: bad count")))?;
        Self::new(
            parts[0].trim(),
            number(parts[1], "lower bound")?,
            number(parts[2], "upper bound")?,
            count,
        )
    }
}

impl fmt::Display for GridAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}:{}", self.name, self.lower, self.upper, self.count)
    }
}

/// Parses a fixed parameter written `name=value`.
pub fn parse_fixed(s: &str) -> Result<(String, f64)> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| Error::InvalidParameter(format!("fixed parameter {s:?} is not name=value")))?;
    let value: f64 = value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("fixed parameter {s:?}: bad value")))?;
    if !value.is_finite() {
        return Err(Error::InvalidParameter(format!("fixed parameter {s:?} is not finite")));
    }
    Ok((name.trim().to_string(), value))
}

/// Rectangular grid; parameters without an axis take their fixed value.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterGrid {
    axes: Vec<GridAxis>,
    fixed: BTreeMap<String, f64>,
}

impl ParameterGrid {
    pub fn new(axes: Vec<GridAxis>, fixed: BTreeMap<String, f64>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidParameter("grid has no axes".into()));
        }
        for (k, axis) in axes.iter().enumerate() {
            if axes[..k].iter().any(|a| a.name == axis.name) {
                return Err(Error::InvalidParameter(format!("axis {} given twice", axis.name)));
            }
            if fixed.contains_key(&axis.name) {
                return Err(Error::InvalidParameter(format!(
                    "{} is both a grid axis and fixed",
                    axis.name
                )));
            }
        }
        Ok(Self { axes, fixed })
    }

    pub fn axes(&self) -> &[GridAxis] {
        &self.axes
    }

    pub fn fixed(&self) -> &BTreeMap<String, f64> {
        &self.fixed
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat parameter vectors ordered like `names`, the first axis varying
    /// slowest.
    pub fn points(&self, names: &[String]) -> Result<Vec<Vec<f64>>> {
        for axis in &self.axes {
            if !names.contains(&axis.name) {
                return Err(Error::InvalidParameter(format!(
                    "unknown parameter {} (model has {})",
                    axis.name,
                    names.join(", ")
                )));
            }
        }
        if let Some(name) = self.fixed.keys().find(|k| !names.contains(k)) {
            return Err(Error::InvalidParameter(format!("unknown fixed parameter {name}")));
        }
        let source: Vec<Source> = names
            .iter()
            .map(|name| match self.axes.iter().position(|a| &a.name == name) {
                Some(k) => Ok(Source::Axis(k)),
                None => self.fixed.get(name).map(|&v| Source::Fixed(v)).ok_or_else(|| {
                    Error::InvalidParameter(format!("parameter {name} has neither axis nor value"))
                }),
            })
            .collect::<Result<_>>()?;

        let total = self.len();
        let mut points = Vec::with_capacity(total);
        let mut index = vec![0usize; self.axes.len()];
        for _ in 0..total {
            points.push(
                source
                    .iter()
                    .map(|s| match *s {
                        Source::Axis(k) => self.axes[k].value(index[k]),
                        Source::Fixed(v) => v,
                    })
                    .collect(),
            );
            for k in (0..self.axes.len()).rev() {
                index[k] += 1;
                if index[k] < self.axes[k].count {
                    break;
                }
                index[k] = 0;
            }
        }
        Ok(points)
    }
}

enum Source {
    Axis(usize),
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionSettings {
    pub draws: usize,
    pub alpha: f64,
    pub seeds: StreamSeeds,
    pub method: CriticalMethod,
    pub space: LatentSpace,
    pub time_cap: Option<Duration>,
}

impl RegionSettings {
    pub fn new(draws: usize, alpha: f64, seeds: StreamSeeds) -> Self {
        Self {
            draws,
            alpha,
            seeds,
            method: CriticalMethod::default(),
            space: LatentSpace::Conditional,
            time_cap: None,
        }
    }

    fn mc(&self) -> McSettings {
        McSettings {
            draws: self.draws,
            alpha: self.alpha,
            seeds: self.seeds,
            method: self.method,
            space: self.space,
            stop_when_decided: false,
            time_cap: self.time_cap,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionPoint {
    pub theta: Vec<f64>,
    pub t_star: f64,
    pub in_outer: bool,
    /// Filled only where the exact test ran.
    pub t_n: Option<f64>,
    pub tau_fraction: Option<f64>,
    pub in_exact: bool,
    pub undecided: usize,
    pub timed_out: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionMeta {
    pub parameter_names: Vec<String>,
    pub grid: Vec<String>,
    pub fixed: BTreeMap<String, f64>,
    pub n: usize,
    pub draws: usize,
    pub alpha: f64,
    pub seed: u64,
    pub lambda_x: f64,
    pub c0: f64,
    pub c0_rank: usize,
    pub points: usize,
    pub outer_points: usize,
    pub exact_evaluated: bool,
    pub exact_points: usize,
    pub undecided_draws: usize,
    pub timed_out_points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_secs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionResult {
    pub points: Vec<RegionPoint>,
    pub meta: RegionMeta,
}

/// Runs `f` over `items` on the current rayon pool and returns the results
/// in input order, or the error of the lowest failing index.
fn ordered_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> Result<U> + Sync) -> Result<Vec<U>> {
    let results: Vec<Result<U>> = items.par_iter().map(&f).collect();
    results.into_iter().collect()
}

/// Outer region: `T*_n(theta) <= c^0` at every grid point.
pub fn compute_outer_region<M: StructuralModel>(
    grid: &ParameterGrid,
    ctx: &InferenceData<'_, M>,
    settings: &RegionSettings,
) -> Result<RegionResult> {
    let names = ctx.model.parameter_names();
    let flat = grid.points(&names)?;
    let k = ctx.model.theta1_dim();
    let thetas = flat
        .iter()
        .map(|v| {
            let theta = Theta::from_flat(v, k)?;
            ctx.model.check_theta(&theta)?;
            Ok(theta)
        })
        .collect::<Result<Vec<_>>>()?;
    let critical = outer_critical_value(
        ctx.model,
        ctx.covariates(),
        &ctx.metric,
        settings.draws,
        settings.alpha,
        &settings.seeds,
    )?;
    let stats = ordered_map(&thetas, |theta| outer_stat(ctx, theta, &settings.seeds))?;
    let points: Vec<RegionPoint> = flat
        .into_iter()
        .zip(stats)
        .map(|(theta, t_star)| RegionPoint {
            theta,
            t_star,
            in_outer: t_star <= critical.c0,
            t_n: None,
            tau_fraction: None,
            in_exact: false,
            undecided: 0,
            timed_out: false,
        })
        .collect();
    let meta = RegionMeta {
        parameter_names: names,
        grid: grid.axes().iter().map(ToString::to_string).collect(),
        fixed: grid.fixed().clone(),
        n: ctx.n(),
        draws: settings.draws,
        alpha: settings.alpha,
        seed: settings.seeds.root(),
        lambda_x: ctx.metric.lambda_x,
        c0: critical.c0,
        c0_rank: critical.rank,
        points: points.len(),
        outer_points: points.iter().filter(|p| p.in_outer).count(),
        exact_evaluated: false,
        exact_points: 0,
        undecided_draws: 0,
        timed_out_points: 0,
        wall_time_secs: None,
    };
    Ok(RegionResult { points, meta })
}

/// Runs the Monte Carlo test at the points of the outer region; the others
/// stay outside the exact region without evaluation.
pub fn compute_exact_region<M: StructuralModel>(
    mut outer: RegionResult,
    ctx: &InferenceData<'_, M>,
    settings: &RegionSettings,
) -> Result<RegionResult> {
    let k = ctx.model.theta1_dim();
    let mc = settings.mc();
    let todo: Vec<usize> = (0..outer.points.len())
        .filter(|&i| outer.points[i].in_outer)
        .collect();
    let decisions = ordered_map(&todo, |&i| {
        let theta = Theta::from_flat(&outer.points[i].theta, k)?;
        mc_membership_test(ctx, &theta, &mc)
    })?;
    for (&i, d) in todo.iter().zip(decisions) {
        let p = &mut outer.points[i];
        p.t_n = Some(d.t_n);
        p.tau_fraction = Some(d.tau_fraction());
        p.in_exact = d.accept;
        p.undecided = d.undecided;
        p.timed_out = d.timed_out;
    }
    let meta = &mut outer.meta;
    meta.exact_evaluated = true;
    meta.exact_points = outer.points.iter().filter(|p| p.in_exact).count();
    meta.undecided_draws = outer.points.iter().map(|p| p.undecided).sum();
    meta.timed_out_points = outer.points.iter().filter(|p| p.timed_out).count();
    Ok(outer)
}

/// Outer region followed by the exact region inside it.
pub fn compute_region<M: StructuralModel>(
    grid: &ParameterGrid,
    ctx: &InferenceData<'_, M>,
    settings: &RegionSettings,
) -> Result<RegionResult> {
    let outer = compute_outer_region(grid, ctx, settings)?;
    compute_exact_region(outer, ctx, settings)
}

impl RegionResult {
    /// One row per grid point: parameter components, `t_star`, `in_outer`,
    /// `t_n`, `tau_fraction`, `in_exact`. Unevaluated cells are empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = self.meta.parameter_names.clone();
        header.extend(
            ["t_star", "in_outer", "t_n", "tau_fraction", "in_exact"]
                .iter()
                .map(|s| s.to_string()),
        );
        w.write_record(&header)?;
        for p in &self.points {
            let mut record: Vec<String> = p.theta.iter().map(|v| v.to_string()).collect();
            record.push(p.t_star.to_string());
            record.push(p.in_outer.to_string());
            record.push(p.t_n.map(|v| v.to_string()).unwrap_or_default());
            record.push(p.tau_fraction.map(|v| v.to_string()).unwrap_or_default());
            record.push(p.in_exact.to_string());
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn meta_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.meta)?)
    }
}
