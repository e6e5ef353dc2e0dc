//! Frame-record CSV: parsing never panics, and anything that parses survives
//! an emit/reparse round trip unchanged.

#![no_main]

use libfuzzer_sys::fuzz_target;
use viewplan::io::tables::{frame_records_to_csv, parse_frame_records};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(records) = parse_frame_records(text) {
        let emitted = frame_records_to_csv(&records).expect("emit parsed records");
        let reparsed = parse_frame_records(&emitted).expect("reparse emitted records");
        assert_eq!(records, reparsed);
    }
});
