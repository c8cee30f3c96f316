//! The structural-model contract consumed by the inference engine.
//!
//! A model is a support restriction `Gamma(theta1)` on (outcome, covariate,
//! latent) triples together with a conditional latent law
//! `Q_{U|X; theta2}` given through a quantile map. The engine only ever
//! touches a model through the two sections of the support restriction:
//! the outcomes predicted at a latent point ([`StructuralModel::predictions`])
//! and the set of latent points that rationalize an outcome
//! ([`StructuralModel::section`]).

use std::cmp::Ordering;
use std::fmt::Debug;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameter split into support-restriction and latent-law components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    pub theta1: Vec<f64>,
    pub theta2: Vec<f64>,
}

impl Theta {
    pub fn new(theta1: Vec<f64>, theta2: Vec<f64>) -> Result<Self> {
        if theta1.iter().chain(&theta2).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "parameter entries must be finite".into(),
            ));
        }
        Ok(Self { theta1, theta2 })
    }

    /// Splits a flat parameter vector after `theta1_dim` entries.
    pub fn from_flat(values: &[f64], theta1_dim: usize) -> Result<Self> {
        if theta1_dim > values.len() {
            return Err(Error::DimensionMismatch {
                what: "parameter vector",
                expected: theta1_dim,
                got: values.len(),
            });
        }
        Self::new(values[..theta1_dim].to_vec(), values[theta1_dim..].to_vec())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.theta1.iter().chain(&self.theta2).copied().collect()
    }
}

/// Covariate point, a real matrix stored row-major. Scalars and vectors are
/// the `1x1` and `1xk` cases.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariate {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Covariate {
    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                what: "covariate entries",
                expected: rows * cols,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("covariate entries must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn scalar(x: f64) -> Result<Self> {
        Self::matrix(1, 1, vec![x])
    }

    pub fn vector(x: Vec<f64>) -> Result<Self> {
        let k = x.len();
        Self::matrix(1, k, x)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Frobenius distance to `other`.
    pub fn distance(&self, other: &Covariate) -> f64 {
        debug_assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Total order on covariate points: row-major flattening compared
/// lexicographically with `f64::total_cmp`.
#[derive(Debug, Clone)]
pub struct CovariateKey<'a>(&'a [f64]);

impl PartialEq for CovariateKey<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for CovariateKey<'_> {}

impl PartialOrd for CovariateKey<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for CovariateKey<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        for (a, b) in self.0.iter().zip(other.0) {
            match a.total_cmp(b) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        self.0.len().cmp(&other.0.len())
    }
}

pub fn covariate_sort_key(x: &Covariate) -> CovariateKey<'_> {
    CovariateKey(&x.data)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation<Y> {
    pub y: Y,
    pub x: Covariate,
}

/// Weight of the covariate part of the metric
/// `d((u, x), (u', x')) = |u - u'| + lambda_x |x - x'|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub lambda_x: f64,
}

impl MetricConfig {
    pub fn new(lambda_x: f64) -> Result<Self> {
        if !(lambda_x >= 0.0 && lambda_x.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda_x must be finite and nonnegative, got {lambda_x}"
            )));
        }
        Ok(Self { lambda_x })
    }

    #[inline]
    pub fn covariate_penalty(&self, xi: &Covariate, xj: &Covariate) -> f64 {
        if self.lambda_x == 0.0 {
            0.0
        } else {
            self.lambda_x * xi.distance(xj)
        }
    }
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self { lambda_x: 1.0 }
    }
}

/// A structural model with discrete outcomes.
///
/// Implementations must be immutable after construction; every method may
/// be called concurrently.
pub trait StructuralModel: Send + Sync {
    type Outcome: Clone + Ord + Debug + Send + Sync;
    /// The latent part of `Gamma_u(y, x; theta1)`, prepared for repeated
    /// distance queries.
    type Section: Send + Sync;

    fn latent_dim(&self) -> usize;

    /// Names of the `theta1` then `theta2` components, in order.
    fn parameter_names(&self) -> Vec<String>;

    /// Number of leading names that belong to `theta1`.
    fn theta1_dim(&self) -> usize;

    fn check_theta(&self, theta: &Theta) -> Result<()>;

    /// `(y, x, u)` in `Gamma(theta1)`; the set is closed.
    fn support_contains(
        &self,
        y: &Self::Outcome,
        x: &Covariate,
        u: &[f64],
        theta: &Theta,
    ) -> Result<bool>;

    /// All `y` with `(y, x, u)` in `Gamma(theta1)`, in ascending order.
    fn predictions(&self, u: &[f64], x: &Covariate, theta: &Theta) -> Result<Vec<Self::Outcome>>;

    /// `None` when no latent value rationalizes `(y, x)`.
    fn section(&self, y: &Self::Outcome, x: &Covariate, theta: &Theta)
        -> Result<Option<Self::Section>>;

    /// Euclidean distance from `u` to a nonempty section.
    fn section_distance(&self, section: &Self::Section, u: &[f64]) -> f64;

    /// Conditional quantile map `q(nu | x; theta2)`.
    fn latent_quantile(&self, nu: &[f64], x: &Covariate, theta2: &[f64]) -> Result<Vec<f64>>;

    /// Quantile map of the parameter-free reference law `Q*_U`.
    fn reference_quantile(&self, nu: &[f64]) -> Result<Vec<f64>>;

    /// `h(u*, x; theta2)`, mapping reference draws to `Q_{U|x; theta2}`.
    fn star_transform(&self, u_star: &[f64], x: &Covariate, theta2: &[f64]) -> Result<Vec<f64>>;

    /// Section of `Gamma*_u(y, x; theta)`, i.e. the `u*` with
    /// `(y, x, h(u*, x; theta2))` in `Gamma(theta1)`, as a set in the
    /// reference space.
    fn star_section(
        &self,
        y: &Self::Outcome,
        x: &Covariate,
        theta: &Theta,
    ) -> Result<Option<Self::Section>>;
}

pub(crate) fn check_latent_dim(dim: usize, u: &[f64]) -> Result<()> {
    if u.len() != dim {
        return Err(Error::DimensionMismatch {
            what: "latent dimension",
            expected: dim,
            got: u.len(),
        });
    }
    Ok(())
}

pub(crate) fn check_uniform(nu: &[f64]) -> Result<()> {
    match nu.iter().find(|&&v| !(v > 0.0 && v < 1.0)) {
        Some(&value) => Err(Error::OutOfDomain {
            value,
            domain: "(0, 1)",
        }),
        None => Ok(()),
    }
}

/// `d((u_tilde, x_i), Gamma_u(y_j, x_j; theta1))`; infinite when the
/// section is empty.
pub fn dist_to_gamma_u<M: StructuralModel>(
    model: &M,
    u_tilde: &[f64],
    x_i: &Covariate,
    y_j: &M::Outcome,
    x_j: &Covariate,
    theta: &Theta,
    metric: &MetricConfig,
) -> Result<f64> {
    check_latent_dim(model.latent_dim(), u_tilde)?;
    if x_i.as_slice().len() != x_j.as_slice().len() {
        return Err(Error::DimensionMismatch {
            what: "covariate entries",
            expected: x_j.as_slice().len(),
            got: x_i.as_slice().len(),
        });
    }
    Ok(match model.section(y_j, x_j, theta)? {
        Some(section) => {
            model.section_distance(&section, u_tilde) + metric.covariate_penalty(x_i, x_j)
        }
        None => f64::INFINITY,
    })
}

/// Predictions of the reformulated model at a reference draw `u*`.
pub fn star_predictions<M: StructuralModel>(
    model: &M,
    u_star: &[f64],
    x: &Covariate,
    theta: &Theta,
) -> Result<Vec<M::Outcome>> {
    let u = model.star_transform(u_star, x, &theta.theta2)?;
    model.predictions(&u, x, theta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_keys_order_numerically() {
        let a = Covariate::scalar(-1.5).unwrap();
        let b = Covariate::scalar(2.0).unwrap();
        assert!(covariate_sort_key(&a) < covariate_sort_key(&b));
        assert_eq!(covariate_sort_key(&a), covariate_sort_key(&a.clone()));
    }

    #[test]
    fn matrix_keys_are_row_major_lexicographic() {
        let a = Covariate::matrix(2, 2, vec![1.0, 5.0, 0.0, 0.0]).unwrap();
        let b = Covariate::matrix(2, 2, vec![1.0, 5.0, 0.0, 1.0]).unwrap();
        let c = Covariate::matrix(2, 2, vec![1.0, 6.0, -9.0, -9.0]).unwrap();
        assert!(covariate_sort_key(&a) < covariate_sort_key(&b));
        assert!(covariate_sort_key(&b) < covariate_sort_key(&c));
    }

    #[test]
    fn covariates_must_be_finite_and_shaped() {
        assert!(Covariate::scalar(f64::NAN).is_err());
        assert!(Covariate::matrix(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn frobenius_distance() {
        let a = Covariate::matrix(2, 1, vec![0.0, 0.0]).unwrap();
        let b = Covariate::matrix(2, 1, vec![3.0, 4.0]).unwrap();
        assert_eq!(a.distance(&b), 5.0);
        let m = MetricConfig::new(0.5).unwrap();
        assert_eq!(m.covariate_penalty(&a, &b), 2.5);
    }

    #[test]
    fn metric_weight_is_validated() {
        assert!(MetricConfig::new(-0.1).is_err());
        assert!(MetricConfig::new(f64::NAN).is_err());
        assert_eq!(MetricConfig::default().lambda_x, 1.0);
    }

    #[test]
    fn uniform_domain_is_open() {
        assert!(check_uniform(&[0.5, 0.1]).is_ok());
        assert!(matches!(check_uniform(&[0.0]), Err(Error::OutOfDomain { .. })));
        assert!(check_uniform(&[1.0]).is_err());
        assert!(check_uniform(&[f64::NAN]).is_err());
    }
}
