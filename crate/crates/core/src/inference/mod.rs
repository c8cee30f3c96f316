//! Test statistics and critical values.

mod mc;
mod minmax;
mod outer;

pub use mc::{
    critical_draw, critical_rank, mc_membership_test, required_exceedances, CriticalMethod, DrawOutcome,
    McSettings, TestDecision,
};
pub use minmax::{
    cx_critical_stat, ncx_critical_stat, ColumnChoiceSet, CutStrategy, CxSettings, MinMaxResult,
    Termination,
};
pub use outer::{
    outer_critical_value, outer_stat, paired_distance, reference_critical_stat, OuterCritical,
};

use crate::assignment::{solve_assignment, CostMatrix};
use crate::error::{Error, Result};
use crate::latent::{draw_uniforms, materialize, materialize_reference, LatentSample};
use crate::model::{star_predictions, Covariate, MetricConfig, Observation, StructuralModel, Theta};

/// Which latent law the statistics are built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatentSpace {
    /// `Q_{U|X; theta2}` with the support restriction `Gamma(theta1)`.
    Conditional,
    /// The reference law `Q*_U` with the reformulated restriction
    /// `Gamma*(theta)`.
    Reference,
}

/// A data set bound to a model and a metric, with the covariate part of the
/// metric precomputed.
pub struct InferenceData<'a, M: StructuralModel> {
    pub model: &'a M,
    pub data: &'a [Observation<M::Outcome>],
    pub metric: MetricConfig,
    covariates: Vec<Covariate>,
    /// `lambda_x * |X_i - X_j|`, row-major.
    penalty: Vec<f64>,
}

impl<'a, M: StructuralModel> InferenceData<'a, M> {
    pub fn new(
        model: &'a M,
        data: &'a [Observation<M::Outcome>],
        metric: MetricConfig,
    ) -> Result<Self> {
        let n = data.len();
        if n == 0 {
            return Err(Error::InvalidInput("empty data set".into()));
        }
        let covariates: Vec<Covariate> = data.iter().map(|o| o.x.clone()).collect();
        let width = covariates[0].as_slice().len();
        if let Some(bad) = covariates.iter().find(|x| x.as_slice().len() != width) {
            return Err(Error::DimensionMismatch {
                what: "covariate entries",
                expected: width,
                got: bad.as_slice().len(),
            });
        }
        let mut penalty = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let p = metric.covariate_penalty(&covariates[i], &covariates[j]);
                penalty[i * n + j] = p;
                penalty[j * n + i] = p;
            }
        }
        Ok(Self {
            model,
            data,
            metric,
            covariates,
            penalty,
        })
    }

    pub fn n(&self) -> usize {
        self.data.len()
    }

    pub fn covariates(&self) -> &[Covariate] {
        &self.covariates
    }

    #[inline]
    pub fn penalty(&self, i: usize, j: usize) -> f64 {
        self.penalty[i * self.n() + j]
    }

    /// Latent sample number `stream` drawn with `seed` in the given space.
    pub fn latent(
        &self,
        seed: u64,
        stream: u64,
        theta: &Theta,
        space: LatentSpace,
    ) -> Result<LatentSample> {
        let draws = draw_uniforms(seed, stream, self.n(), self.model.latent_dim());
        match space {
            LatentSpace::Conditional => {
                materialize(&draws, &self.covariates, &theta.theta2, self.model)
            }
            LatentSpace::Reference => materialize_reference(&draws, &self.covariates, self.model),
        }
    }

    fn section(
        &self,
        y: &M::Outcome,
        x: &Covariate,
        theta: &Theta,
        space: LatentSpace,
    ) -> Result<Option<M::Section>> {
        match space {
            LatentSpace::Conditional => self.model.section(y, x, theta),
            LatentSpace::Reference => self.model.star_section(y, x, theta),
        }
    }

    fn predictions(
        &self,
        u: &[f64],
        x: &Covariate,
        theta: &Theta,
        space: LatentSpace,
    ) -> Result<Vec<M::Outcome>> {
        match space {
            LatentSpace::Conditional => self.model.predictions(u, x, theta),
            LatentSpace::Reference => star_predictions(self.model, u, x, theta),
        }
    }

    fn check_latent(&self, latent: &LatentSample) -> Result<()> {
        if latent.n() != self.n() {
            return Err(Error::DimensionMismatch {
                what: "latent sample size",
                expected: self.n(),
                got: latent.n(),
            });
        }
        if latent.dim() != self.model.latent_dim() {
            return Err(Error::DimensionMismatch {
                what: "latent dimension",
                expected: self.model.latent_dim(),
                got: latent.dim(),
            });
        }
        Ok(())
    }

    /// Column `j` of a cost matrix: distances from every `(U_i, X_i)` to the
    /// section of `(y, X_j)`.
    fn cost_column(
        &self,
        latent: &LatentSample,
        section: &M::Section,
        j: usize,
    ) -> Vec<f64> {
        (0..self.n())
            .map(|i| self.model.section_distance(section, latent.row(i)) + self.penalty(i, j))
            .collect()
    }
}

/// `C[i, j] = d((U_i, X_i), Gamma_u(Y_j, X_j; theta))`.
pub fn build_cost_matrix<M: StructuralModel>(
    ctx: &InferenceData<'_, M>,
    latent: &LatentSample,
    theta: &Theta,
    space: LatentSpace,
) -> Result<CostMatrix> {
    ctx.check_latent(latent)?;
    let n = ctx.n();
    let mut data = vec![f64::INFINITY; n * n];
    for (j, obs) in ctx.data.iter().enumerate() {
        if let Some(section) = ctx.section(&obs.y, &obs.x, theta, space)? {
            let column = ctx.cost_column(latent, &section, j);
            for (i, v) in column.into_iter().enumerate() {
                data[i * n + j] = v;
            }
        }
    }
    CostMatrix::new(n, data)
}

/// Optimal transport value of the cost matrix; infinite when no plan
/// avoids the unrationalizable cells.
pub fn test_statistic<M: StructuralModel>(
    ctx: &InferenceData<'_, M>,
    latent: &LatentSample,
    theta: &Theta,
    space: LatentSpace,
) -> Result<f64> {
    let c = build_cost_matrix(ctx, latent, theta, space)?;
    match solve_assignment(&c) {
        Ok(plan) => Ok(plan.value),
        Err(Error::Infeasible) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// Candidate columns for the critical statistic: for each `j`, one column
/// per outcome the model predicts at `(U'_j, X_j)`, with rows from `latent`.
pub fn column_choices<M: StructuralModel>(
    ctx: &InferenceData<'_, M>,
    latent_prime: &LatentSample,
    latent: &LatentSample,
    theta: &Theta,
    space: LatentSpace,
) -> Result<ColumnChoiceSet> {
    ctx.check_latent(latent)?;
    ctx.check_latent(latent_prime)?;
    let mut columns = Vec::with_capacity(ctx.n());
    for (j, x) in ctx.covariates.iter().enumerate() {
        let predicted = ctx.predictions(latent_prime.row(j), x, theta, space)?;
        let mut list = Vec::with_capacity(predicted.len());
        for y in &predicted {
            if let Some(section) = ctx.section(y, x, theta, space)? {
                list.push(ctx.cost_column(latent, &section, j));
            }
        }
        columns.push(list);
    }
    ColumnChoiceSet::new(columns)
}
