//! Monte Carlo latent samples.
//!
//! A latent sample pairs each covariate `X_i` with a draw from
//! `Q_{U | X_i; theta2}`. Uniform vectors `nu_1..nu_n` are drawn first, the
//! covariates are sorted, and row `r(i)` of the uniforms is pushed through
//! the quantile map conditional on `X_i`, where `r` is the sorting
//! permutation. Conditional on the covariates the rows are i.i.d. from the
//! right law whatever the permutation, so this only fixes which row each
//! observation reads.

use crate::error::{Error, Result};
use crate::model::{covariate_sort_key, Covariate, StructuralModel};
use crate::rng::Stream;

/// `n x dim` matrix of i.i.d. uniforms on the open unit cube.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformDraws {
    pub seed: u64,
    pub stream_id: u64,
    n: usize,
    dim: usize,
    nu: Vec<f64>,
}

impl UniformDraws {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.nu[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.nu
    }
}

/// Draws are filled row-major from the stream `(seed, stream_id)`, so
/// element `(row, col)` is draw number `row * dim + col` of that stream.
pub fn draw_uniforms(seed: u64, stream_id: u64, n: usize, dim: usize) -> UniformDraws {
    let mut stream = Stream::new(seed, stream_id);
    let nu = (0..n * dim).map(|_| stream.uniform()).collect();
    UniformDraws {
        seed,
        stream_id,
        n,
        dim,
        nu,
    }
}

/// Stable sort of the covariates; `perm[k]` is the index of the k-th
/// smallest covariate.
pub fn sorting_permutation(xs: &[Covariate]) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..xs.len()).collect();
    perm.sort_by(|&a, &b| covariate_sort_key(&xs[a]).cmp(&covariate_sort_key(&xs[b])));
    perm
}

/// Materialized latent draws, one row per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSample {
    n: usize,
    dim: usize,
    u: Vec<f64>,
    /// Sorting permutation used to assign uniform rows.
    pub permutation: Vec<usize>,
    pub seed: u64,
    pub stream_id: u64,
}

impl LatentSample {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.u[i * self.dim..(i + 1) * self.dim]
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut u = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    what: "latent row",
                    expected: dim,
                    got: row.len(),
                });
            }
            u.extend_from_slice(row);
        }
        Ok(Self {
            n: rows.len(),
            dim,
            u,
            permutation: (0..rows.len()).collect(),
            seed: 0,
            stream_id: 0,
        })
    }
}

/// `U_i := q(nu_{r(i)} | X_i; theta2)` for every `i`.
pub fn materialize<M: StructuralModel>(
    draws: &UniformDraws,
    xs: &[Covariate],
    theta2: &[f64],
    model: &M,
) -> Result<LatentSample> {
    materialize_with(draws, xs, model.latent_dim(), |nu, x| {
        model.latent_quantile(nu, x, theta2)
    })
}

/// Same construction with the parameter-free reference law `Q*_U`.
pub fn materialize_reference<M: StructuralModel>(
    draws: &UniformDraws,
    xs: &[Covariate],
    model: &M,
) -> Result<LatentSample> {
    materialize_with(draws, xs, model.latent_dim(), |nu, _| {
        model.reference_quantile(nu)
    })
}

fn materialize_with(
    draws: &UniformDraws,
    xs: &[Covariate],
    dim: usize,
    mut quantile: impl FnMut(&[f64], &Covariate) -> Result<Vec<f64>>,
) -> Result<LatentSample> {
    if draws.n() != xs.len() {
        return Err(Error::DimensionMismatch {
            what: "latent sample size",
            expected: xs.len(),
            got: draws.n(),
        });
    }
    if draws.dim() != dim {
        return Err(Error::DimensionMismatch {
            what: "uniform draw dimension",
            expected: dim,
            got: draws.dim(),
        });
    }
    let r = sorting_permutation(xs);
    let mut u = Vec::with_capacity(xs.len() * dim);
    for (i, x) in xs.iter().enumerate() {
        let point = quantile(draws.row(r[i]), x)?;
        if point.len() != dim {
            return Err(Error::DimensionMismatch {
                what: "quantile output",
                expected: dim,
                got: point.len(),
            });
        }
        u.extend_from_slice(&point);
    }
    Ok(LatentSample {
        n: xs.len(),
        dim,
        u,
        permutation: r,
        seed: draws.seed,
        stream_id: draws.stream_id,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalars(v: &[f64]) -> Vec<Covariate> {
        v.iter().map(|&x| Covariate::scalar(x).unwrap()).collect()
    }

    #[test]
    fn draws_are_reproducible_per_stream() {
        let a = draw_uniforms(42, 0, 20, 3);
        assert_eq!(a, draw_uniforms(42, 0, 20, 3));
        assert_ne!(a.as_slice(), draw_uniforms(42, 1, 20, 3).as_slice());
        assert!(a.as_slice().iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn uniform_mean_is_one_half() {
        let d = draw_uniforms(9, 4, 100_000, 1);
        let mean = d.as_slice().iter().sum::<f64>() / 100_000.0;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn sorted_input_gives_identity() {
        assert_eq!(sorting_permutation(&scalars(&[1.0, 2.0, 3.0])), vec![0, 1, 2]);
    }

    #[test]
    fn reversed_input_gives_reversal() {
        assert_eq!(sorting_permutation(&scalars(&[3.0, 2.0, 1.0])), vec![2, 1, 0]);
    }

    #[test]
    fn ties_keep_original_order() {
        assert_eq!(
            sorting_permutation(&scalars(&[2.0, 1.0, 2.0, 1.0])),
            vec![1, 3, 0, 2]
        );
    }
}
