#![no_main]

use homolock::config::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(config) = RunConfig::parse(text) {
            // Building may fail on physics grounds but must not panic.
            let _ = config.opo_params();
            let _ = config.efficiency();
            let _ = config.two_mode_field();
            let _ = config.detuning_grid();
        }
    }
});
