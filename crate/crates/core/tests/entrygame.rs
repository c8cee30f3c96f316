//! Entry game checks against independent oracles written here.

use mcot::entrygame::{
    enumerate_ne, game_dist_to_section, is_pure_ne, simulate_dgp, BoxSection, EntryGame,
    GameTheta, Profile, Selection,
};
use mcot::model::{Covariate, StructuralModel};
use mcot::rng::{StreamSeeds, Stream};
use proptest::prelude::*;

/// Payoff-by-payoff equilibrium check that sums opponents' actions directly.
fn oracle_is_ne(actions: &[u8], x: &[Vec<f64>], eps: &[f64], beta: &[f64], delta: f64) -> bool {
    for s in 0..actions.len() {
        let mut others = 0.0;
        for (t, &a) in actions.iter().enumerate() {
            if t != s {
                others += f64::from(a);
            }
        }
        let mut index = 0.0;
        for (xk, bk) in x[s].iter().zip(beta) {
            index += xk * bk;
        }
        let enter = index - delta * others + eps[s];
        let profitable_deviation = if actions[s] == 1 { enter < 0.0 } else { enter > 0.0 };
        if profitable_deviation {
            return false;
        }
    }
    true
}

fn oracle_all_ne(x: &[Vec<f64>], eps: &[f64], beta: &[f64], delta: f64) -> Vec<Vec<u8>> {
    let players = x.len();
    let mut out = Vec::new();
    // Counting in binary with player 0 as the most significant digit gives
    // lexicographic order.
    for code in 0..(1u32 << players) {
        let actions: Vec<u8> = (0..players)
            .map(|s| ((code >> (players - 1 - s)) & 1) as u8)
            .collect();
        if oracle_is_ne(&actions, x, eps, beta, delta) {
            out.push(actions);
        }
    }
    out
}

fn covariate(x: &[Vec<f64>]) -> Covariate {
    let cols = x[0].len();
    Covariate::matrix(x.len(), cols, x.concat()).unwrap()
}

/// Projection distance by zooming grid search over the feasible set, where
/// feasibility is decided by the equilibrium oracle.
fn grid_distance(actions: &[u8], x: &[Vec<f64>], eps: &[f64], beta: &[f64], delta: f64) -> f64 {
    let d = eps.len();
    // A feasible anchor: push every coordinate far in the required direction.
    let mut best: Vec<f64> = actions
        .iter()
        .map(|&a| if a == 1 { 1e3 } else { -1e3 })
        .collect();
    assert!(oracle_is_ne(actions, x, &best, beta, delta));
    let dist = |p: &[f64]| p.iter().zip(eps).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let mut best_d = dist(&best);
    if oracle_is_ne(actions, x, eps, beta, delta) {
        return 0.0;
    }
    let steps = 8i64;
    let mut center = eps.to_vec();
    let mut half = best_d;
    let total = (2 * steps + 1).pow(d as u32);
    for _ in 0..60 {
        let mut improved = best.clone();
        for code in 0..total {
            let mut c = code;
            let mut p = vec![0.0; d];
            for k in 0..d {
                let offset = (c % (2 * steps + 1)) - steps;
                c /= 2 * steps + 1;
                p[k] = center[k] + half * offset as f64 / steps as f64;
            }
            if oracle_is_ne(actions, x, &p, beta, delta) {
                let dp = dist(&p);
                if dp < best_d {
                    best_d = dp;
                    improved = p;
                }
            }
        }
        best = improved;
        center = best.clone();
        half *= 0.5;
        if half < 1e-9 {
            break;
        }
    }
    best_d
}

fn instance(players: usize) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>, Vec<f64>, f64)> {
    (
        prop::collection::vec(-2.0f64..2.0, players),
        prop::collection::vec(-2.5f64..2.5, players),
        prop::collection::vec(-1.5f64..1.5, 2),
        0.0f64..2.0,
    )
        .prop_map(|(x1, eps, beta, delta)| {
            let x = x1.into_iter().map(|v| vec![1.0, v]).collect();
            (x, eps, beta, delta)
        })
}

fn profile_strategy(players: usize) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..=1, players)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn equilibria_match_the_oracle(players in 1usize..=6, seed in any::<u64>()) {
        let mut stream = Stream::new(seed, 0);
        let x: Vec<Vec<f64>> = (0..players).map(|_| vec![1.0, stream.standard_normal()]).collect();
        let eps: Vec<f64> = (0..players).map(|_| stream.standard_normal()).collect();
        let beta = vec![stream.standard_normal(), stream.standard_normal()];
        let delta = 2.0 * stream.uniform();
        let theta = GameTheta::new(beta.clone(), delta).unwrap();
        let got: Vec<Vec<u8>> = enumerate_ne(&covariate(&x), &eps, &theta)
            .unwrap()
            .iter()
            .map(Profile::actions)
            .collect();
        let expected = oracle_all_ne(&x, &eps, &beta, delta);
        prop_assert!(!got.is_empty(), "substitutes game without a pure equilibrium");
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn box_distance_matches_grid_projection(
        (x, eps, beta, delta) in instance(3),
        actions in profile_strategy(3),
    ) {
        let theta = GameTheta::new(beta.clone(), delta).unwrap();
        let y = Profile::from_actions(&actions).unwrap();
        let got = game_dist_to_section(&eps, &y, &covariate(&x), &theta).unwrap();
        let oracle = grid_distance(&actions, &x, &eps, &beta, delta);
        prop_assert!((got - oracle).abs() <= 1e-6, "got {got}, oracle {oracle}");
    }

    #[test]
    fn zero_distance_iff_equilibrium(
        (x, eps, beta, delta) in instance(4),
        actions in profile_strategy(4),
    ) {
        let theta = GameTheta::new(beta.clone(), delta).unwrap();
        let y = Profile::from_actions(&actions).unwrap();
        let xc = covariate(&x);
        let d = BoxSection::new(&y, &xc, &theta).unwrap().distance(&eps);
        let ne = is_pure_ne(&y, &xc, &eps, &theta).unwrap();
        prop_assert_eq!(d == 0.0, ne);
        prop_assert_eq!(ne, oracle_is_ne(&actions, &x, &eps, &beta, delta));
    }

    #[test]
    fn predictions_are_the_outcomes_with_the_shock_in_their_section(
        (x, eps, beta, delta) in instance(3),
    ) {
        let game = EntryGame::new(3).unwrap();
        let theta = GameTheta::new(beta, delta).unwrap().to_theta();
        let xc = covariate(&x);
        let predicted = game.predictions(&eps, &xc, &theta).unwrap();
        for code in 0..8u8 {
            let actions = [(code >> 2) & 1, (code >> 1) & 1, code & 1];
            let y = Profile::from_actions(&actions).unwrap();
            let section = game.section(&y, &xc, &theta).unwrap().unwrap();
            let inside = game.section_distance(&section, &eps) == 0.0;
            prop_assert_eq!(predicted.contains(&y), inside);
            prop_assert_eq!(game.support_contains(&y, &xc, &eps, &theta).unwrap(), inside);
        }
    }
}

#[test]
fn uniform_selection_splits_two_equilibria_evenly() {
    let game = EntryGame::new(2).unwrap();
    let theta = GameTheta::new(vec![1.0, 0.0], 2.0).unwrap();
    let sim = simulate_dgp(&game, 40_000, &theta, Selection::Uniform, &StreamSeeds::new(5)).unwrap();
    let mut multiple = 0usize;
    let mut first = 0usize;
    for (i, obs) in sim.observations.iter().enumerate() {
        let eq = enumerate_ne(&obs.x, &sim.shocks[i], &theta).unwrap();
        assert_eq!(eq.len(), sim.multiplicity[i]);
        assert!(eq.contains(&obs.y));
        if eq.len() == 2 {
            multiple += 1;
            first += usize::from(obs.y == eq[0]);
        }
    }
    assert!(multiple > 5_000, "only {multiple} markets with two equilibria");
    let share = first as f64 / multiple as f64;
    assert!((share - 0.5).abs() <= 0.02, "share {share}");
}

#[test]
fn first_and_adversarial_selection_pick_equilibria() {
    let game = EntryGame::new(3).unwrap();
    let theta = GameTheta::new(vec![0.6, 0.6], 0.3).unwrap();
    let seeds = StreamSeeds::new(11);
    for selection in [Selection::First, Selection::AdversarialGreedy] {
        let sim = simulate_dgp(&game, 500, &theta, selection, &seeds).unwrap();
        for (i, obs) in sim.observations.iter().enumerate() {
            let eq = enumerate_ne(&obs.x, &sim.shocks[i], &theta).unwrap();
            assert!(eq.contains(&obs.y));
            if selection == Selection::First {
                assert_eq!(obs.y, eq[0]);
            }
        }
    }
}

#[test]
fn simulation_is_reproducible() {
    let game = EntryGame::new(3).unwrap();
    let theta = GameTheta::new(vec![0.6, 0.6], 0.3).unwrap();
    let a = simulate_dgp(&game, 50, &theta, Selection::Uniform, &StreamSeeds::new(3)).unwrap();
    let b = simulate_dgp(&game, 50, &theta, Selection::Uniform, &StreamSeeds::new(3)).unwrap();
    let c = simulate_dgp(&game, 50, &theta, Selection::Uniform, &StreamSeeds::new(4)).unwrap();
    assert_eq!(a.observations, b.observations);
    assert_ne!(a.observations, c.observations);
}
