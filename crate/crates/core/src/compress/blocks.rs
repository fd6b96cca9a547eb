use super::{CompressError, KooStrategy};
use crate::posterior::{argmax, PosteriorMatrix, BLANK_ID};

/// A maximal run of frames sharing one argmax token. Blank runs are blocks too.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameBlock<'a> {
    pub token: usize,
    pub start: usize,
    /// Inclusive.
    pub end: usize,
    /// Rows `start..=end`, row-major.
    pub frames: &'a [f32],
    vocab: usize,
}

impl<'a> FrameBlock<'a> {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn row(&self, offset: usize) -> &'a [f32] {
        &self.frames[offset * self.vocab..(offset + 1) * self.vocab]
    }
}

/// Run-length segmentation of the argmax path into blocks tiling `[0, T)`.
///
/// Blank blocks are kept so that two runs of the same token separated by
/// blanks stay distinct blocks.
pub fn segment_blocks(p: &PosteriorMatrix) -> Vec<FrameBlock<'_>> {
    let vocab = p.vocab_size();
    let mut blocks = Vec::new();
    let mut t = 0;
    while t < p.frames() {
        let token = argmax(p.row(t)).0;
        let mut end = t;
        while end + 1 < p.frames() && argmax(p.row(end + 1)).0 == token {
            end += 1;
        }
        blocks.push(FrameBlock {
            token,
            start: t,
            end,
            frames: &p.values()[t * vocab..(end + 1) * vocab],
            vocab,
        });
        t = end + 1;
    }
    blocks
}

/// One-hot blank row `[1, 0, ..., 0]`.
pub fn custom_blank(vocab: usize) -> Vec<f32> {
    let mut row = vec![0.0; vocab];
    row[BLANK_ID] = 1.0;
    row
}

/// Frame index in `block` with the highest (or lowest) probability for the
/// block's token. Ties go to the earliest frame.
pub fn koo_select(block: &FrameBlock<'_>, strategy: KooStrategy) -> Result<usize, CompressError> {
    if block.token == BLANK_ID {
        return Err(CompressError::BlankBlock);
    }
    let mut best = 0;
    let mut best_value = block.row(0)[block.token];
    for offset in 1..block.len() {
        let v = block.row(offset)[block.token];
        let better = match strategy {
            KooStrategy::Max => v > best_value,
            KooStrategy::Min => v < best_value,
        };
        if better {
            best = offset;
            best_value = v;
        }
    }
    Ok(block.start + best)
}
