//! Frame-level posterior matrices.
//!
//! A [`PosteriorMatrix`] holds one probability row per acoustic frame. Column
//! [`BLANK_ID`] is the CTC blank everywhere in this crate. Storage is the
//! probability domain; the decoder converts to negative-log costs itself.

mod io;
mod synth;

pub use io::{
    decode_binary, decode_text, encode_binary, encode_text, load_posteriors, save_posteriors,
    PosteriorFormat, PosteriorIoError, SPKF_MAGIC, SPKF_VERSION,
};
pub use synth::{inject_confusions, synth_posteriors, ConfusionConfig, SynthConfig, SynthError};

use thiserror::Error;

/// Column index of the CTC blank token.
pub const BLANK_ID: usize = 0;

/// Tolerance on row sums accepted when validating a posterior matrix.
pub const ROW_SUM_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Error, PartialEq)]
pub enum PosteriorError {
    #[error("vocabulary size {0} is too small (need blank plus at least one token)")]
    VocabTooSmall(usize),
    #[error("expected {expected} values for the declared shape, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("non-finite value at frame {frame}, column {column}")]
    NonFinite { frame: usize, column: usize },
    #[error("value {value} at frame {frame}, column {column} is not a probability")]
    NotAProbability { frame: usize, column: usize, value: f32 },
    #[error("row {frame} sums to {sum}")]
    RowSum { frame: usize, sum: f64 },
    #[error("token index {token} outside [1, {vocab})")]
    TokenOutOfRange { token: usize, vocab: usize },
}

/// Unnormalized per-frame scores, row-major `frames x vocab`.
#[derive(Clone, Debug, PartialEq)]
pub struct LogitsMatrix {
    frames: usize,
    vocab: usize,
    values: Vec<f32>,
}

impl LogitsMatrix {
    pub fn new(frames: usize, vocab: usize, values: Vec<f32>) -> Result<Self, PosteriorError> {
        if vocab < 2 {
            return Err(PosteriorError::VocabTooSmall(vocab));
        }
        let expected = frames * vocab;
        if values.len() != expected {
            return Err(PosteriorError::ShapeMismatch { expected, actual: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(PosteriorError::NonFinite { frame: i / vocab, column: i % vocab });
        }
        Ok(Self { frames, vocab, values })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab
    }

    pub fn row(&self, t: usize) -> &[f32] {
        &self.values[t * self.vocab..(t + 1) * self.vocab]
    }
}

/// Per-frame token distributions, row-major `frames x vocab`.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorMatrix {
    frames: usize,
    vocab: usize,
    values: Vec<f32>,
}

impl PosteriorMatrix {
    /// Builds a matrix after checking shape, range and row sums.
    pub fn new(frames: usize, vocab: usize, values: Vec<f32>) -> Result<Self, PosteriorError> {
        if vocab < 2 {
            return Err(PosteriorError::VocabTooSmall(vocab));
        }
        let expected = frames
            .checked_mul(vocab)
            .ok_or(PosteriorError::ShapeMismatch { expected: usize::MAX, actual: values.len() })?;
        if values.len() != expected {
            return Err(PosteriorError::ShapeMismatch { expected, actual: values.len() });
        }
        for (t, row) in values.chunks_exact(vocab).enumerate() {
            let mut sum = 0.0f64;
            for (column, &value) in row.iter().enumerate() {
                if !value.is_finite() {
                    return Err(PosteriorError::NonFinite { frame: t, column });
                }
                if !(0.0..=1.0).contains(&value) {
                    return Err(PosteriorError::NotAProbability { frame: t, column, value });
                }
                sum += value as f64;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(PosteriorError::RowSum { frame: t, sum });
            }
        }
        Ok(Self { frames, vocab, values })
    }

    /// Builds a matrix from rows already known to be stochastic.
    pub(crate) fn from_rows_unchecked(vocab: usize, values: Vec<f32>) -> Self {
        debug_assert!(vocab >= 2 && values.len() % vocab == 0);
        Self { frames: values.len() / vocab, vocab, values }
    }

    /// A matrix with zero frames.
    pub fn empty(vocab: usize) -> Result<Self, PosteriorError> {
        Self::new(0, vocab, Vec::new())
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab
    }

    pub fn is_empty(&self) -> bool {
        self.frames == 0
    }

    pub fn row(&self, t: usize) -> &[f32] {
        &self.values[t * self.vocab..(t + 1) * self.vocab]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f32> {
        self.values.chunks_exact(self.vocab)
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Copies the rows `[start, end)` into a new matrix.
    pub fn slice_frames(&self, start: usize, end: usize) -> Self {
        Self {
            frames: end - start,
            vocab: self.vocab,
            values: self.values[start * self.vocab..end * self.vocab].to_vec(),
        }
    }
}

/// Row-wise softmax over the vocabulary dimension.
///
/// Logits are validated finite at construction, so this cannot fail; the
/// exponentials are taken in `f64` after subtracting the row maximum.
pub fn softmax(logits: &LogitsMatrix) -> PosteriorMatrix {
    let vocab = logits.vocab;
    let mut out = Vec::with_capacity(logits.values.len());
    let mut scratch = vec![0.0f64; vocab];
    for t in 0..logits.frames {
        let row = logits.row(t);
        let max = row.iter().fold(f32::NEG_INFINITY, |m, &v| m.max(v)) as f64;
        let mut total = 0.0;
        for (s, &v) in scratch.iter_mut().zip(row) {
            *s = (v as f64 - max).exp();
            total += *s;
        }
        out.extend(scratch.iter().map(|&s| (s / total) as f32));
    }
    PosteriorMatrix::from_rows_unchecked(vocab, out)
}

/// Softmax over raw values, rejecting non-finite input with the offending frame.
pub fn softmax_values(frames: usize, vocab: usize, values: Vec<f32>) -> Result<PosteriorMatrix, PosteriorError> {
    Ok(softmax(&LogitsMatrix::new(frames, vocab, values)?))
}

/// Index and value of the row maximum; ties go to the lowest index.
pub fn argmax(row: &[f32]) -> (usize, f32) {
    let mut best = 0;
    let mut best_value = row[0];
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > best_value {
            best = i;
            best_value = v;
        }
    }
    (best, best_value)
}

/// Per-frame argmax token, length `frames`.
pub fn argmax_labels(p: &PosteriorMatrix) -> Vec<usize> {
    p.rows().map(|row| argmax(row).0).collect()
}

/// CTC collapse: merge repeats, then drop blanks.
pub fn ctc_collapse(alignment: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = None;
    for &c in alignment {
        if prev != Some(c) && c != BLANK_ID {
            out.push(c);
        }
        prev = Some(c);
    }
    out
}

/// Ground-truth token sequence for one utterance (no blanks).
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct LabelSequence {
    pub tokens: Vec<usize>,
    pub reference: Option<String>,
}

impl LabelSequence {
    pub fn new(tokens: Vec<usize>, vocab: usize) -> Result<Self, PosteriorError> {
        if let Some(&token) = tokens.iter().find(|&&t| t == BLANK_ID || t >= vocab) {
            return Err(PosteriorError::TokenOutOfRange { token, vocab });
        }
        Ok(Self { tokens, reference: None })
    }

    pub fn with_reference(mut self, reference: impl Into<String>) -> Self {
        self.reference = Some(reference.into());
        self
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}
