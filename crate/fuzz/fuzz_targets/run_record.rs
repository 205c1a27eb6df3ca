#![no_main]

use libfuzzer_sys::fuzz_target;
use risforge_core::scenario::parse_run;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok((record, _)) = parse_run(text) {
        let (again, _) = parse_run(&record.to_json()).expect("re-parse of serialized record");
        assert_eq!(again.content_digest, record.content_digest);
    }
});
