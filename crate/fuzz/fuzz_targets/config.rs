#![no_main]

use libfuzzer_sys::fuzz_target;
use simweight_cli::parse_config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(entries) = parse_config(text) {
        for e in entries {
            assert!(!e.key.is_empty() && !e.key.contains('='));
            assert!(e.line >= 1);
        }
    }
});
