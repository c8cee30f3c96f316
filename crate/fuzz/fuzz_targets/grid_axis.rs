#![no_main]

use libfuzzer_sys::fuzz_target;
use mcot::region::{parse_fixed, GridAxis};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(axis) = s.parse::<GridAxis>() {
        // Printing and parsing again gives the same axis.
        let again: GridAxis = axis.to_string().parse().expect("display output parses");
        assert_eq!(again, axis);
        assert!(axis.count >= 1);
        for k in 0..axis.count.min(64) {
            let v = axis.value(k);
            assert!(v >= axis.lower && v <= axis.upper);
        }
    }
    let _ = parse_fixed(s);
});
