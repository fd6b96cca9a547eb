//! Frame-synchronous Viterbi beam search over a decoding graph.
//!
//! Costs are negative natural logs. Graph input label `i` reads posterior
//! column `i - 1`; label 0 is epsilon and consumes no frame.

mod batch;

pub use batch::{decode_batch, sweep_params, BatchResult, SweepGrid, SweepRow};

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compress::{CompressedPosteriors, FrameSource};
use crate::posterior::PosteriorMatrix;
use crate::wfst::{Fst, Label, StateId, EPSILON};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecoderConfig {
    /// Cost width kept around the best token each frame.
    pub beam: f64,
    /// Cost width of the alternatives recorded for the lattice.
    pub lattice_beam: f64,
    /// Cap on live tokens per frame.
    pub max_active: usize,
    /// Multiplier on the acoustic cost `-ln p`.
    pub acoustic_scale: f64,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self { beam: 16.0, lattice_beam: 8.0, max_active: 5000, acoustic_scale: 1.0 }
    }
}

impl DecoderConfig {
    /// No pruning at all.
    pub fn exhaustive() -> Self {
        Self { beam: f64::INFINITY, lattice_beam: f64::INFINITY, max_active: usize::MAX, acoustic_scale: 1.0 }
    }

    pub fn validate(&self) -> Result<(), DecodeError> {
        let positive = |v: f64| v > 0.0 && !v.is_nan();
        if !positive(self.beam) {
            return Err(DecodeError::InvalidConfig(format!("beam must be positive, got {}", self.beam)));
        }
        if !positive(self.lattice_beam) {
            return Err(DecodeError::InvalidConfig(format!("lattice_beam must be positive, got {}", self.lattice_beam)));
        }
        if self.max_active == 0 {
            return Err(DecodeError::InvalidConfig("max_active must be at least 1".into()));
        }
        if !positive(self.acoustic_scale) || self.acoustic_scale.is_infinite() {
            return Err(DecodeError::InvalidConfig(format!(
                "acoustic_scale must be positive and finite, got {}",
                self.acoustic_scale
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum DecodeError {
    #[error("invalid decoder config: {0}")]
    InvalidConfig(String),
    #[error("graph arcs must be sorted by input label")]
    NotArcSorted,
    #[error("graph has no start state")]
    EmptyGraph,
    #[error("graph reads input label {label} but posteriors have only {vocab} columns")]
    VocabMismatch { label: Label, vocab: usize },
    #[error("no token survived frame {frame}")]
    BeamCollapse { frame: usize },
    #[error("no surviving token reached a final state")]
    NoFinalState,
    #[error("epsilon closure did not converge at frame {frame}; the graph may have a negative epsilon cycle")]
    EpsilonDivergence { frame: usize },
}

/// Decoder input: dense posteriors, or compressed ones whose rows map back
/// to source frames.
#[derive(Clone, Copy, Debug)]
pub enum Frames<'a> {
    Dense(&'a PosteriorMatrix),
    Compressed(&'a CompressedPosteriors),
}

impl<'a> Frames<'a> {
    pub fn matrix(&self) -> &'a PosteriorMatrix {
        match self {
            Frames::Dense(p) => p,
            Frames::Compressed(c) => c.matrix(),
        }
    }

    fn source(&self, row: usize) -> FrameSource {
        match self {
            Frames::Dense(_) => FrameSource::Frame(row),
            Frames::Compressed(c) => c.source_map()[row],
        }
    }
}

impl<'a> From<&'a PosteriorMatrix> for Frames<'a> {
    fn from(p: &'a PosteriorMatrix) -> Self {
        Frames::Dense(p)
    }
}

impl<'a> From<&'a CompressedPosteriors> for Frames<'a> {
    fn from(c: &'a CompressedPosteriors) -> Self {
        Frames::Compressed(c)
    }
}

/// One frame of the best path: the input row, where it came from, and the
/// graph input label consumed there.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlignedToken {
    pub frame: usize,
    pub source: FrameSource,
    pub token: Label,
}

/// An emitting transition retained within `lattice_beam` of a frame's best.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatticeArc {
    pub frame: usize,
    pub from: StateId,
    pub to: StateId,
    pub ilabel: Label,
    pub olabel: Label,
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeResult {
    pub words: Vec<Label>,
    pub alignment: Vec<AlignedToken>,
    pub total_cost: f64,
    pub frames_processed: usize,
    pub wall_time: Duration,
    /// Live tokens after pruning, one entry per frame.
    pub tokens_alive_histogram: Vec<usize>,
    pub lattice: Vec<LatticeArc>,
}

impl DecodeResult {
    /// Equality ignoring `wall_time`.
    pub fn same_outcome(&self, other: &Self) -> bool {
        Self { wall_time: Duration::ZERO, ..self.clone() } == Self { wall_time: Duration::ZERO, ..other.clone() }
    }
}

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy)]
struct Token {
    cost: f64,
    prev: u32,
    ilabel: Label,
    olabel: Label,
    /// Input row consumed by the arc into this token; `NONE` for epsilon.
    frame: u32,
}

/// Live tokens keyed by state, with O(1) reset of touched entries.
struct ActiveSet {
    slot: Vec<u32>,
    states: Vec<StateId>,
}

impl ActiveSet {
    fn new(n: usize) -> Self {
        Self { slot: vec![NONE; n], states: Vec::new() }
    }

    fn get(&self, s: StateId) -> Option<u32> {
        let v = self.slot[s as usize];
        (v != NONE).then_some(v)
    }

    fn set(&mut self, s: StateId, token: u32) {
        if self.slot[s as usize] == NONE {
            self.states.push(s);
        }
        self.slot[s as usize] = token;
    }

    fn clear(&mut self) {
        for &s in &self.states {
            self.slot[s as usize] = NONE;
        }
        self.states.clear();
    }
}

struct Search<'g> {
    graph: &'g Fst,
    tokens: Vec<Token>,
    /// Index of the first non-epsilon arc of each state.
    emit_start: Vec<usize>,
    /// Closure worklist membership; all false between calls.
    in_queue: Vec<bool>,
}

impl Search<'_> {
    fn push(&mut self, t: Token) -> u32 {
        self.tokens.push(t);
        (self.tokens.len() - 1) as u32
    }

    /// Relaxes epsilon arcs from every live state until no cost improves.
    fn epsilon_closure(&mut self, active: &mut ActiveSet, frame: usize) -> Result<(), DecodeError> {
        let mut queue: std::collections::VecDeque<StateId> = active.states.iter().copied().collect();
        for &s in &queue {
            self.in_queue[s as usize] = true;
        }
        let limit = 64 * self.graph.num_states().max(16) + 64 * active.states.len();
        let mut relaxations = 0usize;
        while let Some(s) = queue.pop_front() {
            self.in_queue[s as usize] = false;
            let src = active.get(s).expect("queued states are live");
            let cost = self.tokens[src as usize].cost;
            for arc in &self.graph.arcs(s)[..self.emit_start[s as usize]] {
                let nc = cost + arc.weight.value();
                let better = active.get(arc.nextstate).map_or(true, |t| nc < self.tokens[t as usize].cost);
                if !better {
                    continue;
                }
                relaxations += 1;
                if relaxations > limit {
                    self.in_queue.iter_mut().for_each(|q| *q = false);
                    return Err(DecodeError::EpsilonDivergence { frame });
                }
                let id = self.push(Token { cost: nc, prev: src, ilabel: EPSILON, olabel: arc.olabel, frame: NONE });
                active.set(arc.nextstate, id);
                if !self.in_queue[arc.nextstate as usize] {
                    self.in_queue[arc.nextstate as usize] = true;
                    queue.push_back(arc.nextstate);
                }
            }
        }
        Ok(())
    }

    /// Beam and max-active pruning; leaves the survivors sorted by state.
    fn prune(&self, active: &mut ActiveSet, cfg: &DecoderConfig) -> f64 {
        let best = active.states.iter().map(|&s| self.cost_of(active, s)).fold(f64::INFINITY, f64::min);
        let cutoff = best + cfg.beam;
        let mut keep: Vec<(f64, StateId)> = active
            .states
            .iter()
            .map(|&s| (self.cost_of(active, s), s))
            .filter(|&(c, _)| c <= cutoff && c.is_finite())
            .collect();
        if keep.len() > cfg.max_active {
            keep.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            keep.truncate(cfg.max_active);
        }
        let tokens: Vec<(StateId, u32)> = keep.iter().map(|&(_, s)| (s, active.get(s).expect("live"))).collect();
        active.clear();
        let mut tokens = tokens;
        tokens.sort_by_key(|&(s, _)| s);
        for (s, t) in tokens {
            active.set(s, t);
        }
        best
    }

    fn cost_of(&self, active: &ActiveSet, s: StateId) -> f64 {
        self.tokens[active.get(s).expect("live") as usize].cost
    }
}

fn check_graph(graph: &Fst, vocab: usize) -> Result<StateId, DecodeError> {
    let start = graph.start().ok_or(DecodeError::EmptyGraph)?;
    if !graph.is_ilabel_sorted() {
        return Err(DecodeError::NotArcSorted);
    }
    let max_label = graph.states().flat_map(|s| graph.arcs(s).iter().map(|a| a.ilabel)).max().unwrap_or(0);
    if max_label as usize > vocab {
        return Err(DecodeError::VocabMismatch { label: max_label, vocab });
    }
    Ok(start)
}

/// Viterbi beam search of `frames` through `graph`.
pub fn decode<'a>(graph: &Fst, frames: impl Into<Frames<'a>>, cfg: &DecoderConfig) -> Result<DecodeResult, DecodeError> {
    let began = Instant::now();
    cfg.validate()?;
    let frames = frames.into();
    let p = frames.matrix();
    let start = check_graph(graph, p.vocab_size())?;

    let emit_start = graph.states().map(|s| graph.arcs(s).partition_point(|a| a.ilabel == EPSILON)).collect();
    let in_queue = vec![false; graph.num_states()];
    let mut search = Search { graph, tokens: Vec::with_capacity(1024), emit_start, in_queue };
    let mut cur = ActiveSet::new(graph.num_states());
    let mut next = ActiveSet::new(graph.num_states());
    let root = search.push(Token { cost: 0.0, prev: NONE, ilabel: EPSILON, olabel: EPSILON, frame: NONE });
    cur.set(start, root);
    search.epsilon_closure(&mut cur, 0)?;
    search.prune(&mut cur, cfg);

    let mut histogram = Vec::with_capacity(p.frames());
    let mut lattice = Vec::new();
    let mut acoustic = vec![0.0f64; p.vocab_size()];
    let mut candidates: Vec<LatticeArc> = Vec::new();
    for t in 0..p.frames() {
        for (a, &v) in acoustic.iter_mut().zip(p.row(t)) {
            *a = if v > 0.0 { -cfg.acoustic_scale * (v as f64).ln() } else { f64::INFINITY };
        }
        candidates.clear();
        for &s in &cur.states {
            let src = cur.get(s).expect("live");
            let cost = search.tokens[src as usize].cost;
            let arcs = &graph.arcs(s)[search.emit_start[s as usize]..];
            for arc in arcs {
                let ac = acoustic[arc.ilabel as usize - 1];
                if ac.is_infinite() || arc.weight.is_zero() {
                    continue;
                }
                let nc = cost + ac + arc.weight.value();
                candidates.push(LatticeArc { frame: t, from: s, to: arc.nextstate, ilabel: arc.ilabel, olabel: arc.olabel, cost: nc });
                let better = next.get(arc.nextstate).map_or(true, |id| nc < search.tokens[id as usize].cost);
                if better {
                    let id = search.push(Token { cost: nc, prev: src, ilabel: arc.ilabel, olabel: arc.olabel, frame: t as u32 });
                    next.set(arc.nextstate, id);
                }
            }
        }
        search.epsilon_closure(&mut next, t)?;
        let best = search.prune(&mut next, cfg);
        if next.states.is_empty() {
            return Err(DecodeError::BeamCollapse { frame: t });
        }
        let lattice_cutoff = best + cfg.lattice_beam;
        lattice.extend(candidates.iter().filter(|c| c.cost <= lattice_cutoff && next.get(c.to).is_some()));
        histogram.push(next.states.len());
        std::mem::swap(&mut cur, &mut next);
        next.clear();
    }

    let mut best: Option<(f64, u32)> = None;
    for &s in &cur.states {
        let fw = graph.final_weight(s);
        if fw.is_zero() {
            continue;
        }
        let id = cur.get(s).expect("live");
        let total = search.tokens[id as usize].cost + fw.value();
        // States are visited in increasing order, so strict `<` keeps the
        // lower state on ties.
        if best.map_or(true, |(c, _)| total < c) {
            best = Some((total, id));
        }
    }
    let (total_cost, mut id) = best.ok_or(DecodeError::NoFinalState)?;

    let mut words = Vec::new();
    let mut alignment = Vec::new();
    while id != NONE {
        let tok = search.tokens[id as usize];
        if tok.olabel != EPSILON {
            words.push(tok.olabel);
        }
        if tok.frame != NONE {
            let frame = tok.frame as usize;
            alignment.push(AlignedToken { frame, source: frames.source(frame), token: tok.ilabel });
        }
        id = tok.prev;
    }
    words.reverse();
    alignment.reverse();
    Ok(DecodeResult {
        words,
        alignment,
        total_cost,
        frames_processed: p.frames(),
        wall_time: began.elapsed(),
        tokens_alive_histogram: histogram,
        lattice,
    })
}
