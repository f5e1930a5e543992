#![no_main]

use libfuzzer_sys::fuzz_target;
use signaling_bandits::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = ExperimentConfig::from_json(text);
    }
});
