#![no_main]

use std::sync::OnceLock;

use libfuzzer_sys::fuzz_target;
use spikedec::compress::{compress, CompressConfig, CompressMode, NbOneHot};
use spikedec::decoder::{decode, DecoderConfig};
use spikedec::graph::DecodingGraph;
use spikedec::posterior::decode_binary;

const LEXICON: &str = "ab\ta b\nba\tb a\naa\ta a\n";
const ARPA: &str = "\\data\\\nngram 1=4\n\\1-grams:\n-0.5 ab\n-0.5 ba\n-0.5 aa\n-0.5 </s>\n\\end\\\n";

fn graph() -> &'static DecodingGraph {
    static GRAPH: OnceLock<DecodingGraph> = OnceLock::new();
    GRAPH.get_or_init(|| DecodingGraph::build(LEXICON, ARPA, None, false).expect("fixed graph builds"))
}

// Posteriors from the binary format, through every compression mode, into
// the decoder. Errors are fine; panics are not.
fuzz_target!(|data: &[u8]| {
    let Ok(p) = decode_binary(data) else { return };
    if p.frames() > 512 {
        return;
    }
    let modes = [
        CompressMode::Dense,
        CompressMode::Ioo,
        CompressMode::IooKoo,
        CompressMode::IooNb,
        CompressMode::Discard,
        CompressMode::Average,
        CompressMode::Lsd,
        CompressMode::Swd,
        CompressMode::AedIoo,
    ];
    for mode in modes {
        let cfg = CompressConfig {
            nb_onehot: if mode == CompressMode::IooNb { NbOneHot::All } else { NbOneHot::Off },
            ..CompressConfig::with_mode(mode)
        };
        let Ok(c) = compress(&p, &cfg) else { continue };
        let _ = decode(&graph().fst, &c, &DecoderConfig::default());
    }
});
