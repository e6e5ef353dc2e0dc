//! Scripted-clearance CSV parser must reject malformed rows and duplicate
//! (episode, step) keys with an error, never panic.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = viewplan::io::tables::parse_scripted(text);
});
