#![no_main]

use evt_core::config::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = RunConfig::from_json(text) {
        assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }
    // The same input as a `--set` override.
    let mut cfg = RunConfig::default();
    let _ = cfg.set(text);
});
