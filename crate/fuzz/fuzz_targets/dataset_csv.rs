#![no_main]

use libfuzzer_sys::fuzz_target;
use mcot::dataset::{read_game_csv, write_game_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(set) = read_game_csv(data) {
        assert!(!set.observations.is_empty());
        let mut out = Vec::new();
        write_game_csv(&set.observations, &mut out).expect("parsed data writes");
        let back = read_game_csv(out.as_slice()).expect("written data parses");
        assert_eq!(back, set);
    }
});
