//! CTC posterior compression and WFST decoding.
//!
//! The pipeline is: frame posteriors ([`posterior`]) are optionally shortened
//! by insert-only-one / keep-only-one compression ([`compress`]), then decoded
//! by a frame-synchronous beam search ([`decoder`]) over a TLG graph built
//! from token, lexicon and n-gram grammar transducers ([`graph`], [`wfst`]).
//! [`eval`] scores transcripts and benchmarks the compression modes.

pub mod compress;
pub mod decoder;
pub mod eval;
pub mod graph;
pub mod posterior;
pub mod wfst;
