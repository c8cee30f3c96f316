#![no_main]

use libfuzzer_sys::fuzz_target;
use mcot_cli::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(config) = RunConfig::from_json(s) {
        if config.validate().is_ok() {
            let _ = config.grid();
            let _ = config.theta_true();
        }
    }
});
