//! OBJ parser must handle arbitrary face index forms without panicking.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = viewplan::io::obj::parse_obj(text);
});
