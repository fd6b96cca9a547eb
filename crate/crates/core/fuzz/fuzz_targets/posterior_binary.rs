#![no_main]

use libfuzzer_sys::fuzz_target;
use spikedec::posterior::{decode_binary, encode_binary};

fuzz_target!(|data: &[u8]| {
    if let Ok(p) = decode_binary(data) {
        // Accepted input must survive a round trip bit for bit.
        let again = decode_binary(&encode_binary(&p)).expect("re-encoded matrix decodes");
        assert_eq!(again.values().len(), p.values().len());
        assert!(again.values().iter().zip(p.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
});
