//! Earlier blank-skipping heuristics, reimplemented as compression modes.

use super::{Builder, CompressError, CompressedPosteriors, FrameSource};
use crate::posterior::{argmax, PosteriorMatrix, BLANK_ID};

/// Drops every frame whose argmax is blank.
pub fn baseline_discard(p: &PosteriorMatrix) -> CompressedPosteriors {
    let mut out = Builder::new(p.vocab_size());
    for t in 0..p.frames() {
        if argmax(p.row(t)).0 != BLANK_ID {
            out.push_frame(p, t);
        }
    }
    out.finish()
}

/// Replaces each blank-argmax run by the element-wise mean of its rows.
pub fn baseline_average(p: &PosteriorMatrix) -> CompressedPosteriors {
    let vocab = p.vocab_size();
    let mut out = Builder::new(vocab);
    let mut t = 0;
    while t < p.frames() {
        if argmax(p.row(t)).0 != BLANK_ID {
            out.push_frame(p, t);
            t += 1;
            continue;
        }
        let start = t;
        while t < p.frames() && argmax(p.row(t)).0 == BLANK_ID {
            t += 1;
        }
        let end = t - 1;
        if start == end {
            out.push_frame(p, start);
            continue;
        }
        let mut mean = vec![0.0f64; vocab];
        for row in start..=end {
            for (m, &v) in mean.iter_mut().zip(p.row(row)) {
                *m += v as f64;
            }
        }
        let n = (end - start + 1) as f64;
        let row: Vec<f32> = mean.iter().map(|&m| (m / n) as f32).collect();
        out.push_row(&row, FrameSource::Mean { start, end });
    }
    out.finish()
}

/// Drops every frame whose blank probability is at least `threshold`.
pub fn baseline_lsd(p: &PosteriorMatrix, threshold: f64) -> Result<CompressedPosteriors, CompressError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(CompressError::Threshold(threshold));
    }
    let mut out = Builder::new(p.vocab_size());
    for t in 0..p.frames() {
        if (p.row(t)[BLANK_ID] as f64) < threshold {
            out.push_frame(p, t);
        }
    }
    Ok(out.finish())
}

/// Keeps the frames within `window` of any non-blank-argmax frame.
pub fn baseline_swd(p: &PosteriorMatrix, window: usize) -> CompressedPosteriors {
    let frames = p.frames();
    let mut keep = vec![false; frames];
    for t in 0..frames {
        if argmax(p.row(t)).0 != BLANK_ID {
            let lo = t.saturating_sub(window);
            let hi = t.saturating_add(window).min(frames - 1);
            keep[lo..=hi].iter_mut().for_each(|k| *k = true);
        }
    }
    let mut out = Builder::new(p.vocab_size());
    for (t, _) in keep.iter().enumerate().filter(|(_, &k)| k) {
        out.push_frame(p, t);
    }
    out.finish()
}
