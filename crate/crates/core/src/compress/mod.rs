//! Pre-decoder posterior compression.
//!
//! Insert-only-one (IOO) collapses every blank run to a deterministic one-hot
//! blank frame. Keep-only-one (KOO) keeps one representative frame per
//! non-blank block. The baselines (discard, average, LSD, SWD) and the AED
//! variant live here too so the decoder sees every mode through one type.

mod baselines;
mod blocks;

pub use baselines::{baseline_average, baseline_discard, baseline_lsd, baseline_swd};
pub use blocks::{custom_blank, koo_select, segment_blocks, FrameBlock};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::posterior::{argmax, PosteriorError, PosteriorMatrix, BLANK_ID};

#[derive(Debug, Error, PartialEq)]
pub enum CompressError {
    #[error("mode {0} is not handled by this operation")]
    WrongMode(CompressMode),
    #[error("blanks_per_region must be 1 or 2, got {0}")]
    BlanksPerRegion(usize),
    #[error("threshold {0} outside [0, 1]")]
    Threshold(f64),
    #[error("nb_threshold requires nb_onehot other than off")]
    ThresholdWithoutOneHot,
    #[error("mode ioo_nb requires nb_onehot other than off")]
    OneHotRequired,
    #[error("KOO selection on a blank block")]
    BlankBlock,
    #[error(transparent)]
    Posterior(#[from] PosteriorError),
    #[error("cannot parse {what} from {value:?}")]
    Parse { what: &'static str, value: String },
}

/// Where an output row came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrameSource {
    /// Input row at this index (possibly rewritten to one-hot by `ioo_nb`).
    Frame(usize),
    /// An inserted one-hot blank row.
    CustomBlank,
    /// Element-wise mean of input rows `start..=end` (averaging baseline).
    Mean { start: usize, end: usize },
}

impl fmt::Display for FrameSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrameSource::Frame(t) => write!(f, "{t}"),
            FrameSource::CustomBlank => f.write_str("B"),
            FrameSource::Mean { start, end } => write!(f, "{start}:{end}"),
        }
    }
}

impl FromStr for FrameSource {
    type Err = CompressError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CompressError::Parse { what: "frame source", value: s.to_string() };
        if s == "B" {
            return Ok(FrameSource::CustomBlank);
        }
        if let Some((a, b)) = s.split_once(':') {
            let start = a.parse().map_err(|_| bad())?;
            let end = b.parse().map_err(|_| bad())?;
            if start > end {
                return Err(bad());
            }
            return Ok(FrameSource::Mean { start, end });
        }
        s.parse().map(FrameSource::Frame).map_err(|_| bad())
    }
}

/// Posterior rows handed to the decoder, with their provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct CompressedPosteriors {
    matrix: PosteriorMatrix,
    source_map: Vec<FrameSource>,
    nonblank_count: usize,
}

impl CompressedPosteriors {
    pub fn new(matrix: PosteriorMatrix, source_map: Vec<FrameSource>) -> Result<Self, CompressError> {
        if source_map.len() != matrix.frames() {
            return Err(PosteriorError::ShapeMismatch { expected: matrix.frames(), actual: source_map.len() }.into());
        }
        let nonblank_count = matrix.rows().filter(|row| argmax(row).0 != BLANK_ID).count();
        Ok(Self { matrix, source_map, nonblank_count })
    }

    pub fn matrix(&self) -> &PosteriorMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> PosteriorMatrix {
        self.matrix
    }

    pub fn source_map(&self) -> &[FrameSource] {
        &self.source_map
    }

    /// Number of output rows whose argmax is a non-blank token (K).
    pub fn nonblank_count(&self) -> usize {
        self.nonblank_count
    }

    /// Output length M.
    pub fn len(&self) -> usize {
        self.matrix.frames()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.is_empty()
    }

    /// Sidecar text: one source entry per line, `B` for inserted blanks.
    pub fn source_map_text(&self) -> String {
        let mut out = String::new();
        for s in &self.source_map {
            out.push_str(&s.to_string());
            out.push('\n');
        }
        out
    }
}

/// Parses a source-map sidecar.
pub fn parse_source_map(text: &str) -> Result<Vec<FrameSource>, CompressError> {
    text.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::parse).collect()
}

/// Incremental construction of a compressed sequence.
pub(crate) struct Builder {
    vocab: usize,
    values: Vec<f32>,
    sources: Vec<FrameSource>,
}

impl Builder {
    pub(crate) fn new(vocab: usize) -> Self {
        Self { vocab, values: Vec::new(), sources: Vec::new() }
    }

    pub(crate) fn push_row(&mut self, row: &[f32], source: FrameSource) {
        self.values.extend_from_slice(row);
        self.sources.push(source);
    }

    pub(crate) fn push_frame(&mut self, p: &PosteriorMatrix, t: usize) {
        self.push_row(p.row(t), FrameSource::Frame(t));
    }

    pub(crate) fn push_custom_blank(&mut self) {
        self.values.push(1.0);
        self.values.extend(std::iter::repeat(0.0).take(self.vocab - 1));
        self.sources.push(FrameSource::CustomBlank);
    }

    pub(crate) fn push_one_hot(&mut self, token: usize, t: usize) {
        let start = self.values.len();
        self.values.extend(std::iter::repeat(0.0).take(self.vocab));
        self.values[start + token] = 1.0;
        self.sources.push(FrameSource::Frame(t));
    }

    pub(crate) fn finish(self) -> CompressedPosteriors {
        let matrix = PosteriorMatrix::from_rows_unchecked(self.vocab, self.values);
        CompressedPosteriors::new(matrix, self.sources).expect("builder keeps rows and sources aligned")
    }
}

macro_rules! string_enum {
    ($name:ident, $what:literal, { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($name::$variant => $text),+ })
            }
        }

        impl FromStr for $name {
            type Err = CompressError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(CompressError::Parse { what: $what, value: s.to_string() }),
                }
            }
        }
    };
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompressMode {
    Dense,
    Ioo,
    IooKoo,
    IooNb,
    Discard,
    Average,
    Lsd,
    Swd,
    AedIoo,
}

string_enum!(CompressMode, "mode", {
    Dense => "dense",
    Ioo => "ioo",
    IooKoo => "ioo_koo",
    IooNb => "ioo_nb",
    Discard => "discard",
    Average => "average",
    Lsd => "lsd",
    Swd => "swd",
    AedIoo => "aed_ioo",
});

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KooStrategy {
    Max,
    Min,
}

string_enum!(KooStrategy, "KOO strategy", { Max => "max", Min => "min" });

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NbOneHot {
    Off,
    All,
    Max,
}

string_enum!(NbOneHot, "nb_onehot", { Off => "off", All => "all", Max => "max" });

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompressConfig {
    pub mode: CompressMode,
    pub koo_strategy: KooStrategy,
    pub blanks_per_region: usize,
    pub nb_onehot: NbOneHot,
    pub nb_threshold: Option<f64>,
    pub lsd_threshold: f64,
    pub swd_window: usize,
}

impl Default for CompressConfig {
    fn default() -> Self {
        Self {
            mode: CompressMode::IooKoo,
            koo_strategy: KooStrategy::Max,
            blanks_per_region: 1,
            nb_onehot: NbOneHot::Off,
            nb_threshold: None,
            lsd_threshold: 0.99,
            swd_window: 1,
        }
    }
}

impl CompressConfig {
    pub fn with_mode(mode: CompressMode) -> Self {
        Self { mode, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), CompressError> {
        if !(1..=2).contains(&self.blanks_per_region) {
            return Err(CompressError::BlanksPerRegion(self.blanks_per_region));
        }
        if let Some(tau) = self.nb_threshold {
            if !(0.0..=1.0).contains(&tau) {
                return Err(CompressError::Threshold(tau));
            }
            if self.nb_onehot == NbOneHot::Off {
                return Err(CompressError::ThresholdWithoutOneHot);
            }
        }
        if self.mode == CompressMode::IooNb && self.nb_onehot == NbOneHot::Off {
            return Err(CompressError::OneHotRequired);
        }
        if !(0.0..=1.0).contains(&self.lsd_threshold) {
            return Err(CompressError::Threshold(self.lsd_threshold));
        }
        Ok(())
    }
}

/// Applies whichever transform `cfg.mode` names.
pub fn compress(p: &PosteriorMatrix, cfg: &CompressConfig) -> Result<CompressedPosteriors, CompressError> {
    cfg.validate()?;
    match cfg.mode {
        CompressMode::Dense => Ok(dense(p)),
        CompressMode::Ioo | CompressMode::IooKoo | CompressMode::IooNb => compress_ctc(p, cfg),
        CompressMode::Discard => Ok(baseline_discard(p)),
        CompressMode::Average => Ok(baseline_average(p)),
        CompressMode::Lsd => baseline_lsd(p, cfg.lsd_threshold),
        CompressMode::Swd => Ok(baseline_swd(p, cfg.swd_window)),
        CompressMode::AedIoo => Ok(compress_aed(p)),
    }
}

/// Identity transform with a trivial source map.
pub fn dense(p: &PosteriorMatrix) -> CompressedPosteriors {
    let sources = (0..p.frames()).map(FrameSource::Frame).collect();
    CompressedPosteriors::new(p.clone(), sources).expect("aligned by construction")
}

/// IOO over blank runs combined with the configured non-blank treatment.
///
/// The output opens with `blanks_per_region` custom blanks, which also stand in
/// for a leading blank run. Every later blank run becomes `blanks_per_region`
/// custom blanks. Non-blank blocks contribute all their frames (`ioo`), the
/// KOO-selected frame (`ioo_koo`), or one-hot rewrites (`ioo_nb`).
pub fn compress_ctc(p: &PosteriorMatrix, cfg: &CompressConfig) -> Result<CompressedPosteriors, CompressError> {
    cfg.validate()?;
    if !matches!(cfg.mode, CompressMode::Ioo | CompressMode::IooKoo | CompressMode::IooNb) {
        return Err(CompressError::WrongMode(cfg.mode));
    }
    let mut out = Builder::new(p.vocab_size());
    if p.is_empty() {
        out.push_custom_blank();
        return Ok(out.finish());
    }
    for _ in 0..cfg.blanks_per_region {
        out.push_custom_blank();
    }
    for (k, block) in segment_blocks(p).iter().enumerate() {
        if block.token == BLANK_ID {
            if k == 0 {
                continue;
            }
            for _ in 0..cfg.blanks_per_region {
                out.push_custom_blank();
            }
            continue;
        }
        match cfg.mode {
            CompressMode::Ioo => {
                for t in block.start..=block.end {
                    out.push_frame(p, t);
                }
            }
            CompressMode::IooKoo => out.push_frame(p, koo_select(block, cfg.koo_strategy)?),
            CompressMode::IooNb => {
                let frames: Vec<usize> = match cfg.nb_onehot {
                    NbOneHot::All => (block.start..=block.end).collect(),
                    NbOneHot::Max => vec![koo_select(block, KooStrategy::Max)?],
                    NbOneHot::Off => unreachable!("validated"),
                };
                for t in frames {
                    let peak = argmax(p.row(t)).1 as f64;
                    if cfg.nb_threshold.map_or(true, |tau| peak >= tau) {
                        out.push_one_hot(block.token, t);
                    } else {
                        out.push_frame(p, t);
                    }
                }
            }
            _ => unreachable!("mode checked above"),
        }
    }
    Ok(out.finish())
}

/// IOO for attention decoders: a custom blank before and after every row.
pub fn compress_aed(p: &PosteriorMatrix) -> CompressedPosteriors {
    let mut out = Builder::new(p.vocab_size());
    out.push_custom_blank();
    for t in 0..p.frames() {
        out.push_frame(p, t);
        out.push_custom_blank();
    }
    out.finish()
}
