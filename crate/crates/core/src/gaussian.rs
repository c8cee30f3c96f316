//! Multivariate normal latent laws written as `U = Sigma^{1/2} U*` with a
//! standard normal `U*`, for models whose latent covariance is a parameter.

use crate::error::{Error, Result};
use crate::normal::inverse_normal_cdf;

/// Lower Cholesky factor `L` (row-major) with `L L' = sigma`.
pub fn cholesky(sigma: &[f64], dim: usize) -> Result<Vec<f64>> {
    if sigma.len() != dim * dim {
        return Err(Error::DimensionMismatch {
            what: "covariance entries",
            expected: dim * dim,
            got: sigma.len(),
        });
    }
    for i in 0..dim {
        for j in 0..i {
            if sigma[i * dim + j] != sigma[j * dim + i] {
                return Err(Error::InvalidParameter("covariance matrix is not symmetric".into()));
            }
        }
    }
    let mut l = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..=i {
            let dot: f64 = (0..j).map(|k| l[i * dim + k] * l[j * dim + k]).sum();
            let v = sigma[i * dim + j] - dot;
            if i == j {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::InvalidParameter(
                        "covariance matrix is not positive definite".into(),
                    ));
                }
                l[i * dim + i] = v.sqrt();
            } else {
                l[i * dim + j] = v / l[j * dim + j];
            }
        }
    }
    Ok(l)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianLaw {
    dim: usize,
    factor: Vec<f64>,
}

impl GaussianLaw {
    pub fn standard(dim: usize) -> Self {
        let mut factor = vec![0.0; dim * dim];
        for i in 0..dim {
            factor[i * dim + i] = 1.0;
        }
        Self { dim, factor }
    }

    pub fn from_covariance(sigma: &[f64], dim: usize) -> Result<Self> {
        Ok(Self {
            dim,
            factor: cholesky(sigma, dim)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn factor(&self) -> &[f64] {
        &self.factor
    }

    /// `h(u*) = L u*`.
    pub fn transform(&self, u_star: &[f64]) -> Result<Vec<f64>> {
        if u_star.len() != self.dim {
            return Err(Error::DimensionMismatch {
                what: "latent dimension",
                expected: self.dim,
                got: u_star.len(),
            });
        }
        Ok((0..self.dim)
            .map(|i| (0..=i).map(|k| self.factor[i * self.dim + k] * u_star[k]).sum())
            .collect())
    }

    /// `L (Phi^{-1}(nu_1), ..., Phi^{-1}(nu_d))`.
    pub fn quantile(&self, nu: &[f64]) -> Result<Vec<f64>> {
        if let Some(&value) = nu.iter().find(|&&v| !(v > 0.0 && v < 1.0)) {
            return Err(Error::OutOfDomain {
                value,
                domain: "(0, 1)",
            });
        }
        let z: Vec<f64> = nu.iter().map(|&p| inverse_normal_cdf(p)).collect();
        self.transform(&z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_reproduces_covariance() {
        let sigma = [4.0, 2.0, 0.6, 2.0, 5.0, 1.5, 0.6, 1.5, 3.0];
        let l = cholesky(&sigma, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| l[i * 3 + k] * l[j * 3 + k]).sum();
                assert!((v - sigma[i * 3 + j]).abs() < 1e-12);
            }
        }
        assert_eq!(l[1], 0.0);
    }

    #[test]
    fn rejects_indefinite_and_asymmetric() {
        assert!(cholesky(&[1.0, 2.0, 2.0, 1.0], 2).is_err());
        assert!(cholesky(&[1.0, 0.1, 0.2, 1.0], 2).is_err());
        assert!(cholesky(&[1.0], 2).is_err());
    }

    #[test]
    fn diagonal_covariance_scales_coordinates() {
        let law = GaussianLaw::from_covariance(&[4.0, 0.0, 0.0, 9.0], 2).unwrap();
        assert_eq!(law.transform(&[1.0, -1.0]).unwrap(), vec![2.0, -3.0]);
        assert_eq!(law.quantile(&[0.5, 0.5]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn standard_law_is_identity() {
        let law = GaussianLaw::standard(3);
        assert_eq!(law.transform(&[0.3, -1.0, 2.0]).unwrap(), vec![0.3, -1.0, 2.0]);
        assert!(law.quantile(&[0.5, 1.0, 0.5]).is_err());
    }
}
