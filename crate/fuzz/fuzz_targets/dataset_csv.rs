#![no_main]

use libfuzzer_sys::fuzz_target;
use simweight::io::{parse_dataset, write_dataset};

fuzz_target!(|data: &[u8]| {
    let Ok(ds) = parse_dataset(data) else { return };
    assert_eq!(ds.outcome().len(), ds.n_rows());
    assert!(ds.covariates().iter().all(|v| v.is_finite()));
    // Whatever parses must survive a write/read round trip unchanged.
    let mut out = Vec::new();
    write_dataset(&ds, &mut out).expect("write");
    assert_eq!(parse_dataset(&out).expect("reparse"), ds);
});
