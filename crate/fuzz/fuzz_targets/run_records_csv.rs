//! Run-record CSV: parsing never panics, and anything that parses survives
//! an emit/reparse round trip unchanged.

#![no_main]

use libfuzzer_sys::fuzz_target;
use viewplan::io::tables::{parse_run_records, run_records_to_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(records) = parse_run_records(text) {
        let emitted = run_records_to_csv(&records).expect("emit parsed records");
        let reparsed = parse_run_records(&emitted).expect("reparse emitted records");
        assert_eq!(records, reparsed);
    }
});
