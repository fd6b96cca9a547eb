#![no_main]

use libfuzzer_sys::fuzz_target;
use spikedec::posterior::{decode_text, encode_text};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(p) = decode_text(text) {
        let again = decode_text(&encode_text(&p)).expect("re-encoded matrix parses");
        assert_eq!((again.frames(), again.vocab_size()), (p.frames(), p.vocab_size()));
    }
});
