#![no_main]

use libfuzzer_sys::fuzz_target;
use spikedec::wfst::SymbolTable;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(t) = SymbolTable::parse(text) {
        assert_eq!(SymbolTable::parse(&t.to_text()).expect("written table parses"), t);
    }
});
