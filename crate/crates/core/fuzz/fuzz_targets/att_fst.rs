#![no_main]

use libfuzzer_sys::fuzz_target;
use spikedec::wfst::{parse_att, write_att};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(f) = parse_att(text, None, None) {
        let back = parse_att(&write_att(&f, false), None, None).expect("written machine parses");
        assert_eq!(back.num_arcs(), f.num_arcs());
    }
});
