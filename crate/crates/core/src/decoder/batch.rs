use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::Serialize;

use super::{decode, DecodeError, DecodeResult, DecoderConfig, Frames};
use crate::eval::{score_pairs, Unit};
use crate::graph::DecodingGraph;
use crate::wfst::Fst;

#[derive(Debug)]
pub struct BatchResult {
    /// One entry per utterance, in input order.
    pub results: Vec<Result<DecodeResult, DecodeError>>,
    /// Elapsed time for the whole batch.
    pub wall_time: Duration,
    /// Sum of per-utterance decode times.
    pub summed_decode_time: Duration,
}

impl BatchResult {
    pub fn failures(&self) -> usize {
        self.results.iter().filter(|r| r.is_err()).count()
    }
}

/// Decodes every utterance against the shared graph using up to `jobs`
/// threads. A failing utterance does not stop the others.
pub fn decode_batch(graph: &Fst, corpus: &[Frames<'_>], cfg: &DecoderConfig, jobs: usize) -> BatchResult {
    let began = Instant::now();
    let jobs = jobs.clamp(1, corpus.len().max(1));
    let results: Vec<Result<DecodeResult, DecodeError>> = if jobs == 1 {
        corpus.iter().map(|&f| decode(graph, f, cfg)).collect()
    } else {
        let slots: Vec<Mutex<Option<Result<DecodeResult, DecodeError>>>> = corpus.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        std::thread::scope(|scope| {
            for _ in 0..jobs {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= corpus.len() {
                        break;
                    }
                    let r = decode(graph, corpus[i], cfg);
                    *slots[i].lock().expect("slot lock") = Some(r);
                });
            }
        });
        slots.into_iter().map(|s| s.into_inner().expect("slot lock").expect("every slot filled")).collect()
    };
    let summed_decode_time = results.iter().filter_map(|r| r.as_ref().ok()).map(|r| r.wall_time).sum();
    BatchResult { results, wall_time: began.elapsed(), summed_decode_time }
}

/// Cartesian grid of decoder settings. The acoustic scale comes from the
/// base config passed to [`sweep_params`].
#[derive(Clone, Debug, PartialEq)]
pub struct SweepGrid {
    pub beams: Vec<f64>,
    pub lattice_beams: Vec<f64>,
    pub max_actives: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub beam: f64,
    pub lattice_beam: f64,
    pub max_active: usize,
    pub cer: f64,
    pub wall_time_s: f64,
    /// Decode time of the widest setting divided by this row's time.
    pub speedup: f64,
    pub failures: usize,
    pub max_tokens_alive: usize,
}

/// Decodes the corpus once per grid point and scores each run against
/// `references` (character error rate over non-whitespace characters).
pub fn sweep_params(
    graph: &DecodingGraph,
    corpus: &[Frames<'_>],
    references: &[String],
    grid: &SweepGrid,
    base: &DecoderConfig,
    jobs: usize,
) -> Result<Vec<SweepRow>, DecodeError> {
    if grid.beams.is_empty() || grid.lattice_beams.is_empty() || grid.max_actives.is_empty() {
        return Err(DecodeError::InvalidConfig("sweep grid is empty".into()));
    }
    if references.len() != corpus.len() {
        return Err(DecodeError::InvalidConfig(format!(
            "{} references for {} utterances",
            references.len(),
            corpus.len()
        )));
    }
    let mut rows = Vec::new();
    for &beam in &grid.beams {
        for &lattice_beam in &grid.lattice_beams {
            for &max_active in &grid.max_actives {
                let cfg = DecoderConfig { beam, lattice_beam, max_active, ..*base };
                cfg.validate()?;
                let batch = decode_batch(&graph.fst, corpus, &cfg, jobs);
                let hyps: Vec<String> = batch
                    .results
                    .iter()
                    .map(|r| r.as_ref().map(|d| graph.word_strings(&d.words).join(" ")).unwrap_or_default())
                    .collect();
                let score = score_pairs(references.iter().map(String::as_str).zip(hyps.iter().map(String::as_str)), Unit::Char);
                let max_tokens_alive = batch
                    .results
                    .iter()
                    .filter_map(|r| r.as_ref().ok())
                    .flat_map(|r| r.tokens_alive_histogram.iter().copied())
                    .max()
                    .unwrap_or(0);
                rows.push(SweepRow {
                    beam,
                    lattice_beam,
                    max_active,
                    cer: score.percent(),
                    wall_time_s: batch.summed_decode_time.as_secs_f64(),
                    speedup: 1.0,
                    failures: batch.failures(),
                    max_tokens_alive,
                });
            }
        }
    }
    let widest = rows
        .iter()
        .max_by(|a, b| {
            a.beam
                .total_cmp(&b.beam)
                .then(a.max_active.cmp(&b.max_active))
                .then(a.lattice_beam.total_cmp(&b.lattice_beam))
        })
        .map(|r| r.wall_time_s)
        .expect("grid is non-empty");
    for r in &mut rows {
        r.speedup = if r.wall_time_s > 0.0 { widest / r.wall_time_s } else { f64::INFINITY };
    }
    Ok(rows)
}
