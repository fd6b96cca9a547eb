//! Binary (`SPKF`) and text serializations of posterior matrices.
//!
//! Binary layout, all integers and floats little-endian:
//!
//! ```text
//! "SPKF" | version: u32 = 1 | frames: u32 | vocab: u32 | frames*vocab f32, row-major
//! ```
//!
//! Text layout: a `T V` header line followed by `T` lines of `V` decimal values.

use std::fs;
use std::path::Path;

use thiserror::Error;

use super::{PosteriorError, PosteriorMatrix};

pub const SPKF_MAGIC: &[u8; 4] = b"SPKF";
pub const SPKF_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PosteriorFormat {
    Binary,
    Text,
}

#[derive(Debug, Error)]
pub enum PosteriorIoError {
    #[error("bad magic bytes (expected \"SPKF\")")]
    BadMagic,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("dimensions {frames} x {vocab} overflow the addressable payload")]
    DimensionOverflow { frames: u64, vocab: u64 },
    #[error("truncated payload: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Invalid(#[from] PosteriorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn encode_binary(p: &PosteriorMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + p.values().len() * 4);
    out.extend_from_slice(SPKF_MAGIC);
    out.extend_from_slice(&SPKF_VERSION.to_le_bytes());
    out.extend_from_slice(&(p.frames() as u32).to_le_bytes());
    out.extend_from_slice(&(p.vocab_size() as u32).to_le_bytes());
    for v in p.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"))
}

pub fn decode_binary(bytes: &[u8]) -> Result<PosteriorMatrix, PosteriorIoError> {
    if bytes.len() < 4 {
        return Err(PosteriorIoError::Truncated { expected: HEADER_LEN, actual: bytes.len() });
    }
    if &bytes[..4] != SPKF_MAGIC {
        return Err(PosteriorIoError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(PosteriorIoError::Truncated { expected: HEADER_LEN, actual: bytes.len() });
    }
    let version = read_u32(bytes, 4);
    if version != SPKF_VERSION {
        return Err(PosteriorIoError::UnsupportedVersion(version));
    }
    let frames = read_u32(bytes, 8) as u64;
    let vocab = read_u32(bytes, 12) as u64;
    let payload = frames
        .checked_mul(vocab)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| usize::try_from(n).ok())
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or(PosteriorIoError::DimensionOverflow { frames, vocab })?;
    if bytes.len() < payload {
        return Err(PosteriorIoError::Truncated { expected: payload, actual: bytes.len() });
    }
    if bytes.len() > payload {
        return Err(PosteriorIoError::TrailingBytes(bytes.len() - payload));
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
        .collect();
    Ok(PosteriorMatrix::new(frames as usize, vocab as usize, values)?)
}

pub fn encode_text(p: &PosteriorMatrix) -> String {
    let mut out = format!("{} {}\n", p.frames(), p.vocab_size());
    for row in p.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

fn parse_error(line: usize, message: impl Into<String>) -> PosteriorIoError {
    PosteriorIoError::Parse { line, message: message.into() }
}

pub fn decode_text(text: &str) -> Result<PosteriorMatrix, PosteriorIoError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| parse_error(1, "missing \"T V\" header"))?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    if dims.len() != 2 {
        return Err(parse_error(1, "header must be \"T V\""));
    }
    let frames: usize = dims[0].parse().map_err(|_| parse_error(1, format!("bad frame count {:?}", dims[0])))?;
    let vocab: usize = dims[1].parse().map_err(|_| parse_error(1, format!("bad vocabulary size {:?}", dims[1])))?;
    if frames.checked_mul(vocab).is_none() {
        return Err(PosteriorIoError::DimensionOverflow { frames: frames as u64, vocab: vocab as u64 });
    }
    let mut values = Vec::new();
    let mut seen = 0;
    for (idx, line) in lines {
        let lineno = idx + 1;
        if seen == frames {
            return Err(parse_error(lineno, "more rows than declared"));
        }
        let before = values.len();
        for field in line.split_whitespace() {
            let v: f32 = field.parse().map_err(|_| parse_error(lineno, format!("bad value {field:?}")))?;
            values.push(v);
        }
        if values.len() - before != vocab {
            return Err(parse_error(lineno, format!("expected {vocab} values, found {}", values.len() - before)));
        }
        seen += 1;
    }
    if seen != frames {
        return Err(parse_error(text.lines().count().max(1), format!("expected {frames} rows, found {seen}")));
    }
    Ok(PosteriorMatrix::new(frames, vocab, values)?)
}

pub fn load_posteriors(path: &Path, format: PosteriorFormat) -> Result<PosteriorMatrix, PosteriorIoError> {
    match format {
        PosteriorFormat::Binary => decode_binary(&fs::read(path)?),
        PosteriorFormat::Text => decode_text(&fs::read_to_string(path)?),
    }
}

pub fn save_posteriors(p: &PosteriorMatrix, path: &Path, format: PosteriorFormat) -> Result<(), PosteriorIoError> {
    match format {
        PosteriorFormat::Binary => fs::write(path, encode_binary(p))?,
        PosteriorFormat::Text => fs::write(path, encode_text(p))?,
    }
    Ok(())
}
