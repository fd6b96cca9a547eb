#![no_main]

use libfuzzer_sys::fuzz_target;
use spikedec::graph::parse_arpa;

fuzz_target!(|data: &[u8]| {
    if data.len() > 1 << 20 {
        return;
    }
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = parse_arpa(text);
});
