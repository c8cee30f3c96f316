//! Outer region: statistic under the reformulated restriction and its
//! parameter-free critical value.

use super::mc::{critical_rank, validate, CriticalMethod};
use super::minmax::{cx_critical_stat, ncx_critical_stat};
use super::{column_choices, test_statistic, InferenceData, LatentSpace};
use crate::assignment::{solve_assignment, CostMatrix};
use crate::error::{Error, Result};
use crate::latent::{draw_uniforms, materialize_reference, LatentSample};
use crate::model::{Covariate, MetricConfig, StructuralModel, Theta};
use crate::rng::StreamSeeds;

#[derive(Debug, Clone, PartialEq)]
pub struct OuterCritical {
    pub c0: f64,
    /// `D_n(C^0)` for draws `s = 1..=S`, in draw order.
    pub draws: Vec<f64>,
    pub rank: usize,
}

/// `T*_n(theta)`: the statistic computed on reference draws (stream 0) with
/// the sections of `Gamma*`.
pub fn outer_stat<M: StructuralModel>(
    ctx: &InferenceData<'_, M>,
    theta: &Theta,
    seeds: &StreamSeeds,
) -> Result<f64> {
    ctx.model.check_theta(theta)?;
    let rows = ctx.latent(seeds.latent(), 0, theta, LatentSpace::Reference)?;
    test_statistic(ctx, &rows, theta, LatentSpace::Reference)
}

/// Point-to-point transport value between two reference samples.
pub fn paired_distance(
    rows: &LatentSample,
    cols: &LatentSample,
    xs: &[Covariate],
    metric: &MetricConfig,
) -> Result<f64> {
    paired_with_penalty(rows, cols, &penalty_matrix(xs, metric))
}

fn penalty_matrix(xs: &[Covariate], metric: &MetricConfig) -> Vec<f64> {
    let n = xs.len();
    let mut penalty = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let p = metric.covariate_penalty(&xs[i], &xs[j]);
            penalty[i * n + j] = p;
            penalty[j * n + i] = p;
        }
    }
    penalty
}

fn paired_with_penalty(rows: &LatentSample, cols: &LatentSample, penalty: &[f64]) -> Result<f64> {
    let n = rows.n();
    if cols.n() != n || penalty.len() != n * n {
        return Err(Error::DimensionMismatch {
            what: "latent sample size",
            expected: n,
            got: cols.n(),
        });
    }
    let c = CostMatrix::from_fn(n, |i, j| {
        let du: f64 = rows
            .row(i)
            .iter()
            .zip(cols.row(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        du + penalty[i * n + j]
    })?;
    Ok(solve_assignment(&c)?.value)
}

/// `c^0`: order statistic of rank `ceil(S (1 - alpha))` of `D_n(C^0)`,
/// where `C^0` pairs reference stream 0 (rows) with reference stream `s`.
///
/// Only covariates enter; the value is the same for every parameter.
pub fn outer_critical_value<M: StructuralModel>(
    model: &M,
    xs: &[Covariate],
    metric: &MetricConfig,
    draws: usize,
    alpha: f64,
    seeds: &StreamSeeds,
) -> Result<OuterCritical> {
    validate(draws, alpha)?;
    if xs.is_empty() {
        return Err(Error::InvalidInput("empty covariate list".into()));
    }
    let dim = model.latent_dim();
    let sample = |s: u64| {
        materialize_reference(&draw_uniforms(seeds.latent(), s, xs.len(), dim), xs, model)
    };
    let rows = sample(0)?;
    let penalty = penalty_matrix(xs, metric);
    let values = (1..=draws as u64)
        .map(|s| paired_with_penalty(&rows, &sample(s)?, &penalty))
        .collect::<Result<Vec<_>>>()?;
    let rank = critical_rank(draws, alpha);
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(OuterCritical {
        c0: sorted[rank - 1],
        draws: values,
        rank,
    })
}

/// Critical statistic of draw `s` in the reference space, with the same
/// rows as `outer_critical_value`; bounded above by `D_n(C^0)` of draw `s`.
pub fn reference_critical_stat<M: StructuralModel>(
    ctx: &InferenceData<'_, M>,
    theta: &Theta,
    seeds: &StreamSeeds,
    s: u64,
    method: &CriticalMethod,
) -> Result<f64> {
    let space = LatentSpace::Reference;
    let rows = ctx.latent(seeds.latent(), 0, theta, space)?;
    let prime = ctx.latent(seeds.latent(), s, theta, space)?;
    let choices = column_choices(ctx, &prime, &rows, theta, space)?;
    match method {
        CriticalMethod::Ncx { budget } => ncx_critical_stat(&choices, *budget),
        CriticalMethod::Cx(cx) => Ok(cx_critical_stat(&choices, cx, None)?.value()),
    }
}
