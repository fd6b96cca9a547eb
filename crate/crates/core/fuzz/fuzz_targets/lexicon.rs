#![no_main]

use libfuzzer_sys::fuzz_target;
use spikedec::graph::{build_lexicon_fst, Lexicon};

fuzz_target!(|data: &[u8]| {
    if data.len() > 1 << 16 {
        return;
    }
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(lex) = Lexicon::parse_with_inferred_tokens(text) {
        let _ = build_lexicon_fst(&lex, true);
    }
});
