//! Latent draws: distribution, quantile accuracy and permutation behavior.

use mcot::entrygame::EntryGame;
use mcot::latent::{draw_uniforms, materialize, materialize_reference, sorting_permutation};
use mcot::model::Covariate;
use mcot::normal::inverse_normal_cdf;
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

fn ks_distance(mut sample: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let f = cdf(v);
            (f - k as f64 / n).abs().max(((k + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn uniform_draws_pass_kolmogorov_smirnov() {
    let draws = draw_uniforms(17, 3, 100_000, 1);
    let d = ks_distance(draws.as_slice().to_vec(), |v| v);
    assert!(d <= 0.01, "KS distance {d}");
    assert!(draws.as_slice().iter().all(|&v| v > 0.0 && v < 1.0));
}

#[test]
fn reference_latents_are_standard_normal() {
    let game = EntryGame::new(2).unwrap();
    let n = 50_000;
    let xs: Vec<Covariate> = (0..n)
        .map(|i| Covariate::matrix(2, 2, vec![1.0, i as f64, 1.0, 0.0]).unwrap())
        .collect();
    let draws = draw_uniforms(4, 1, n, 2);
    let latent = materialize_reference(&draws, &xs, &game).unwrap();
    let normal = Normal::new(0.0, 1.0).unwrap();
    for col in 0..2 {
        let sample: Vec<f64> = (0..n).map(|i| latent.row(i)[col]).collect();
        let d = ks_distance(sample, |v| normal.cdf(v));
        assert!(d <= 0.01, "column {col}: KS distance {d}");
    }
}

#[test]
fn inverse_normal_matches_statrs() {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut worst: f64 = 0.0;
    let mut p = 1e-12;
    while p < 1.0 - 1e-12 {
        let z = inverse_normal_cdf(p);
        let reference = normal.inverse_cdf(p);
        worst = worst.max((z - reference).abs());
        p = if p < 0.01 { p * 1.7 } else if p > 0.99 { 1.0 - (1.0 - p) / 1.7 } else { p + 1e-3 };
    }
    assert!(worst <= 1.2e-9, "worst absolute error {worst}");
}

fn scalar_covariates(values: &[f64]) -> Vec<Covariate> {
    values.iter().map(|&v| Covariate::scalar(v).unwrap()).collect()
}

proptest! {
    #[test]
    fn observation_i_reads_the_uniform_row_of_its_sort_index(
        values in prop::collection::vec(-5.0f64..5.0, 1..30),
        seed in any::<u64>(),
    ) {
        let n = values.len();
        let game = EntryGame::with_covariate_dim(1, 1).unwrap();
        let xs = scalar_covariates(&values);
        let draws = draw_uniforms(seed, 0, n, 1);
        let latent = materialize(&draws, &xs, &[], &game).unwrap();

        // Independent stable sort of the raw values.
        let mut r: Vec<usize> = (0..n).collect();
        r.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        prop_assert_eq!(&latent.permutation, &r);
        for i in 0..n {
            let expected = inverse_normal_cdf(draws.row(r[i])[0]);
            prop_assert_eq!(latent.row(i)[0], expected);
        }
    }

    #[test]
    fn sorting_permutation_sorts(values in prop::collection::vec(-5.0f64..5.0, 0..40)) {
        let xs = scalar_covariates(&values);
        let perm = sorting_permutation(&xs);
        let mut seen = perm.clone();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..values.len()).collect::<Vec<_>>());
        for w in perm.windows(2) {
            prop_assert!(values[w[0]] < values[w[1]] || (values[w[0]] == values[w[1]] && w[0] < w[1]));
        }
    }
}
