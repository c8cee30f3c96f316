//! Replays the fuzz corpus seeds through the fuzz targets' checks.

use std::fs;
use std::path::PathBuf;

use mcot::dataset::{read_game_csv, write_game_csv};
use mcot::region::{parse_fixed, GridAxis};
use mcot_cli::config::RunConfig;

fn seeds(target: &str) -> Vec<Vec<u8>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut files: Vec<_> = fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    assert!(!files.is_empty(), "no seeds in {}", dir.display());
    files.into_iter().map(|p| fs::read(p).unwrap()).collect()
}

#[test]
fn grid_axis_seeds() {
    let mut parsed = 0;
    for seed in seeds("grid_axis") {
        let s = String::from_utf8(seed).unwrap();
        if let Ok(axis) = s.parse::<GridAxis>() {
            parsed += 1;
            assert_eq!(axis.to_string().parse::<GridAxis>().unwrap(), axis);
            for k in 0..axis.count {
                let v = axis.value(k);
                assert!(v >= axis.lower && v <= axis.upper);
            }
        }
        let _ = parse_fixed(&s);
    }
    assert!(parsed > 0);
}

#[test]
fn dataset_csv_seeds() {
    let mut parsed = 0;
    for seed in seeds("dataset_csv") {
        if let Ok(set) = read_game_csv(seed.as_slice()) {
            parsed += 1;
            let mut out = Vec::new();
            write_game_csv(&set.observations, &mut out).unwrap();
            assert_eq!(read_game_csv(out.as_slice()).unwrap(), set);
        }
    }
    assert!(parsed > 0);
}

#[test]
fn config_json_seeds() {
    let mut valid = 0;
    for seed in seeds("config_json") {
        let s = String::from_utf8(seed).unwrap();
        if let Ok(config) = RunConfig::from_json(&s) {
            if config.validate().is_ok() {
                valid += 1;
                let _ = config.grid();
                config.theta_true().unwrap();
            }
        }
    }
    assert!(valid > 0);
}
