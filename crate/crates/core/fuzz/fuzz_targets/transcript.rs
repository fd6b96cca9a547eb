#![no_main]

use libfuzzer_sys::fuzz_target;
use spikedec::eval::{format_transcript, parse_transcript};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(t) = parse_transcript(text) {
        assert_eq!(parse_transcript(&format_transcript(&t)).expect("formatted transcript parses"), t);
    }
});
