//! Quality CSV parser must reject malformed rows with an error, never panic.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = viewplan::io::tables::parse_quality(text);
});
