#![no_main]

use libfuzzer_sys::fuzz_target;
use spikedec::compress::parse_source_map;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = parse_source_map(text);
});
