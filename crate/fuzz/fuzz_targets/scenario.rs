#![no_main]

use libfuzzer_sys::fuzz_target;
use risforge_core::scenario::parse_scenario;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = parse_scenario(text) {
        // Accepted scenarios must survive a write/read cycle unchanged.
        let again = parse_scenario(&cfg.to_toml_string()).expect("re-parse of serialized scenario");
        assert_eq!(again.hash(), cfg.hash());
    }
});
