//! Seeded synthetic CTC posteriors with spike-shaped token activations.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{argmax, LabelSequence, PosteriorMatrix, BLANK_ID};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("peak probability range [{lo}, {hi}] must lie in (1/|V|, 1] = ({min}, 1]")]
    PeakTooLow { lo: f64, hi: f64, min: f64 },
    #[error("invalid range {name}: [{lo}, {hi}]")]
    BadRange { name: &'static str, lo: f64, hi: f64 },
    #[error("token {token} outside [1, {vocab})")]
    TokenOutOfRange { token: usize, vocab: usize },
    #[error("vocabulary size {0} is too small")]
    VocabTooSmall(usize),
}

/// Shape of the generated posteriors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    /// Frames per token spike, inclusive range; minimum 1.
    pub spike_len: (usize, usize),
    /// Frames per blank run between spikes (and at both ends), inclusive range.
    pub blank_run: (usize, usize),
    /// Probability of the dominant token in every frame, inclusive range.
    pub peak: (f64, f64),
    /// Fraction of the residual mass spread with random weights instead of uniformly.
    pub noise_floor: f64,
    /// When set, total blank frames are chosen to hit this fraction of all frames
    /// and `blank_run` is ignored.
    pub blank_ratio: Option<f64>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { spike_len: (1, 3), blank_run: (1, 4), peak: (0.9, 1.0), noise_floor: 0.0, blank_ratio: None }
    }
}

impl SynthConfig {
    pub fn validate(&self, vocab: usize) -> Result<(), SynthError> {
        if vocab < 2 {
            return Err(SynthError::VocabTooSmall(vocab));
        }
        let (lo, hi) = self.spike_len;
        if lo == 0 || lo > hi {
            return Err(SynthError::BadRange { name: "spike_len", lo: lo as f64, hi: hi as f64 });
        }
        let (lo, hi) = self.blank_run;
        if lo > hi {
            return Err(SynthError::BadRange { name: "blank_run", lo: lo as f64, hi: hi as f64 });
        }
        let (lo, hi) = self.peak;
        let min = 1.0 / vocab as f64;
        if !(lo <= hi) || hi > 1.0 {
            return Err(SynthError::BadRange { name: "peak", lo, hi });
        }
        if lo <= min {
            return Err(SynthError::PeakTooLow { lo, hi, min });
        }
        if !(0.0..=1.0).contains(&self.noise_floor) {
            return Err(SynthError::BadRange { name: "noise_floor", lo: self.noise_floor, hi: self.noise_floor });
        }
        if let Some(r) = self.blank_ratio {
            if !(0.0..1.0).contains(&r) {
                return Err(SynthError::BadRange { name: "blank_ratio", lo: r, hi: r });
            }
        }
        Ok(())
    }
}

/// Writes a row whose argmax is `token` with probability `peak`.
fn fill_row(row: &mut [f32], token: usize, peak: f64, noise_floor: f64, rng: &mut ChaCha8Rng) {
    let others = (row.len() - 1) as f64;
    let residual = 1.0 - peak;
    let weights: Vec<f64> = (0..row.len() - 1).map(|_| rng.gen::<f64>()).collect();
    let weight_sum: f64 = weights.iter().sum();
    let mut k = 0;
    for (i, v) in row.iter_mut().enumerate() {
        if i == token {
            *v = peak as f32;
            continue;
        }
        let random_share = if weight_sum > 0.0 { weights[k] / weight_sum } else { 1.0 / others };
        let mass = residual * ((1.0 - noise_floor) / others + noise_floor * random_share);
        *v = mass as f32;
        k += 1;
    }
    // The noisy share may crowd the peak; fall back to a uniform residual then.
    if argmax(row).0 != token {
        for (i, v) in row.iter_mut().enumerate() {
            *v = if i == token { peak as f32 } else { (residual / others) as f32 };
        }
    }
}

/// Spreads `total` blank frames over the gaps, respecting per-gap minimums.
fn distribute_blanks(minimums: &[usize], total: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut gaps = minimums.to_vec();
    let assigned: usize = gaps.iter().sum();
    for _ in assigned..total {
        let g = rng.gen_range(0..gaps.len());
        gaps[g] += 1;
    }
    gaps
}

/// Generates posteriors whose argmax path collapses exactly to `labels`.
///
/// Layout: blank run, spike, blank run, spike, ..., blank run. Gaps between two
/// identical adjacent tokens get at least one blank frame so the repeat survives
/// the collapse.
pub fn synth_posteriors(labels: &LabelSequence, cfg: &SynthConfig, vocab: usize, seed: u64) -> Result<PosteriorMatrix, SynthError> {
    cfg.validate(vocab)?;
    if let Some(&token) = labels.tokens.iter().find(|&&t| t == BLANK_ID || t >= vocab) {
        return Err(SynthError::TokenOutOfRange { token, vocab });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tokens = &labels.tokens;
    let spikes: Vec<usize> = tokens.iter().map(|_| rng.gen_range(cfg.spike_len.0..=cfg.spike_len.1)).collect();
    let minimums: Vec<usize> = (0..=tokens.len())
        .map(|g| usize::from(g > 0 && g < tokens.len() && tokens[g - 1] == tokens[g]))
        .collect();
    let gaps = match cfg.blank_ratio {
        Some(ratio) => {
            let spike_frames: usize = spikes.iter().sum();
            let total = (ratio / (1.0 - ratio) * spike_frames as f64).round() as usize;
            distribute_blanks(&minimums, total, &mut rng)
        }
        None => minimums
            .iter()
            .map(|&m| rng.gen_range(cfg.blank_run.0..=cfg.blank_run.1).max(m))
            .collect(),
    };

    let mut frame_tokens = Vec::new();
    for (i, &token) in tokens.iter().enumerate() {
        frame_tokens.extend(std::iter::repeat(BLANK_ID).take(gaps[i]));
        frame_tokens.extend(std::iter::repeat(token).take(spikes[i]));
    }
    frame_tokens.extend(std::iter::repeat(BLANK_ID).take(gaps[tokens.len()]));

    let mut values = vec![0.0f32; frame_tokens.len() * vocab];
    for (row, &token) in values.chunks_exact_mut(vocab).zip(&frame_tokens) {
        let peak = rng.gen_range(cfg.peak.0..=cfg.peak.1);
        fill_row(row, token, peak, cfg.noise_floor, &mut rng);
    }
    Ok(PosteriorMatrix::from_rows_unchecked(vocab, values))
}

/// Substitution noise applied per non-blank block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfusionConfig {
    /// Probability that a non-blank block is confused.
    pub rate: f64,
    /// Range of the wrong token's probability in confused frames; must exceed 0.5.
    pub peak: (f64, f64),
}

/// Replaces the argmax of randomly chosen non-blank blocks with a wrong token.
///
/// Inside a confused block the wrong token takes probability `q` drawn from
/// `cfg.peak`, the true token keeps `0.8 * (1 - q)` and the rest is spread
/// uniformly. Unlike [`synth_posteriors`], the result no longer collapses to the
/// original labels; it models recognizer errors that a lexicon and language
/// model can still repair when the frame is left untouched.
pub fn inject_confusions(p: &PosteriorMatrix, cfg: &ConfusionConfig, seed: u64) -> Result<PosteriorMatrix, SynthError> {
    let vocab = p.vocab_size();
    if vocab < 3 {
        return Err(SynthError::VocabTooSmall(vocab));
    }
    let (lo, hi) = cfg.peak;
    if !(lo <= hi) || lo <= 0.5 || hi > 1.0 {
        return Err(SynthError::BadRange { name: "confusion peak", lo, hi });
    }
    if !(0.0..=1.0).contains(&cfg.rate) {
        return Err(SynthError::BadRange { name: "confusion rate", lo: cfg.rate, hi: cfg.rate });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = super::argmax_labels(p);
    let mut values = p.values().to_vec();
    let mut t = 0;
    while t < labels.len() {
        let token = labels[t];
        let mut end = t;
        while end + 1 < labels.len() && labels[end + 1] == token {
            end += 1;
        }
        if token != BLANK_ID && rng.gen::<f64>() < cfg.rate {
            let candidates: Vec<usize> = (1..vocab).filter(|&c| c != token).collect();
            let wrong = *candidates.choose(&mut rng).expect("vocab >= 3");
            for row in values[t * vocab..(end + 1) * vocab].chunks_exact_mut(vocab) {
                let q = rng.gen_range(lo..=hi);
                let truth = 0.8 * (1.0 - q);
                let rest = (1.0 - q - truth) / (vocab - 2) as f64;
                for (c, v) in row.iter_mut().enumerate() {
                    *v = if c == wrong {
                        q as f32
                    } else if c == token {
                        truth as f32
                    } else {
                        rest as f32
                    };
                }
            }
        }
        t = end + 1;
    }
    Ok(PosteriorMatrix::from_rows_unchecked(vocab, values))
}
