//! Candidate-pool JSON decoder must reject invalid documents and invalid
//! poses with an error, never panic.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = viewplan::sampling::pool_from_json(text);
});
