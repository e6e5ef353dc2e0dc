//! TOML run-config parser must turn any input into a config or a lined
//! error, never a panic.

#![no_main]

use libfuzzer_sys::fuzz_target;
use viewplan_cli::config::{parse_config, ConfigFormat};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = parse_config(text, ConfigFormat::Toml);
});
