//! CSV round trips of simulated data.

use mcot::dataset::{read_game_csv, write_game_csv};
use mcot::entrygame::{simulate_dgp, EntryGame, GameTheta, Selection};
use mcot::rng::StreamSeeds;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn simulated_data_round_trips(players in 1usize..=5, n in 1usize..40, seed in any::<u64>()) {
        let game = EntryGame::new(players).unwrap();
        let theta = GameTheta::new(vec![0.6, 0.6], 0.3).unwrap();
        let sim = simulate_dgp(&game, n, &theta, Selection::Uniform, &StreamSeeds::new(seed)).unwrap();
        let mut first = Vec::new();
        write_game_csv(&sim.observations, &mut first).unwrap();
        let back = read_game_csv(first.as_slice()).unwrap();
        prop_assert_eq!(back.players, players);
        prop_assert_eq!(back.covariate_dim, 2);
        prop_assert_eq!(&back.observations, &sim.observations);
        let mut second = Vec::new();
        write_game_csv(&back.observations, &mut second).unwrap();
        prop_assert_eq!(first, second);
    }

    #[test]
    fn arbitrary_bytes_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
        let _ = read_game_csv(bytes.as_slice());
    }
}
