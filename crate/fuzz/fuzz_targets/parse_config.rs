#![no_main]

use libfuzzer_sys::fuzz_target;
use msfem::study::parse_config;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = parse_config(text) {
            // A validated config must yield a usable time step on every level.
            for &m in &cfg.levels {
                let (_, dt) = cfg.time_step(m).expect("validated config has a time grid");
                assert!(dt > 0.0 && dt.is_finite());
            }
        }
    }
});
