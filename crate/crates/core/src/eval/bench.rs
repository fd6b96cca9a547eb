use std::time::{Duration, Instant};

use serde::Serialize;

use super::{score_pairs, EvalError, Unit};
use crate::compress::{compress, CompressConfig, CompressMode, KooStrategy};
use crate::decoder::{decode, DecoderConfig, SweepRow};
use crate::graph::DecodingGraph;
use crate::posterior::PosteriorMatrix;

#[derive(Clone, Debug)]
pub struct BenchUtterance {
    pub id: String,
    pub posteriors: PosteriorMatrix,
    pub reference: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub mode: String,
    pub config: CompressConfig,
    /// Character error rate in percent.
    pub cer: f64,
    pub mean_frames: f64,
    /// Dense mean frames over this mode's mean frames.
    pub frame_reduction: f64,
    /// Dense median time over this mode's median time.
    pub speedup: f64,
    /// Median over repeats of summed compress + decode time.
    pub median_seconds: f64,
    pub failures: usize,
    /// Decoded word strings, one per utterance (empty on failure).
    #[serde(skip)]
    pub transcripts: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub utterances: usize,
    pub repeats: usize,
    pub decoder: DecoderConfig,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn row(&self, mode: &str) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.mode == mode)
    }
}

/// Short name for a compression setting; parameters appear only when they
/// differ from the defaults.
pub fn mode_label(cfg: &CompressConfig) -> String {
    let d = CompressConfig::default();
    let mut label = cfg.mode.to_string();
    let mut params = Vec::new();
    match cfg.mode {
        CompressMode::IooKoo if cfg.koo_strategy != KooStrategy::Max => params.push(cfg.koo_strategy.to_string()),
        CompressMode::IooNb => {
            params.push(cfg.nb_onehot.to_string());
            if let Some(t) = cfg.nb_threshold {
                params.push(t.to_string());
            }
        }
        CompressMode::Lsd if cfg.lsd_threshold != d.lsd_threshold => params.push(cfg.lsd_threshold.to_string()),
        CompressMode::Swd if cfg.swd_window != d.swd_window => params.push(cfg.swd_window.to_string()),
        _ => {}
    }
    if matches!(cfg.mode, CompressMode::Ioo | CompressMode::IooKoo | CompressMode::IooNb) && cfg.blanks_per_region != 1 {
        params.push(format!("bpr{}", cfg.blanks_per_region));
    }
    if !params.is_empty() {
        label.push('(');
        label.push_str(&params.join(","));
        label.push(')');
    }
    label
}

fn median(mut xs: Vec<Duration>) -> Duration {
    xs.sort();
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2
    }
}

/// Compresses and decodes the corpus once per mode per repeat, interleaving
/// modes within each repeat. Timing covers compression and decoding only;
/// failed utterances are counted and left out of the timing, and score as
/// empty hypotheses.
pub fn bench(
    graph: &DecodingGraph,
    corpus: &[BenchUtterance],
    modes: &[CompressConfig],
    cfg: &DecoderConfig,
    repeats: usize,
) -> Result<BenchReport, EvalError> {
    if !modes.iter().any(|m| m.mode == CompressMode::Dense) {
        return Err(EvalError::MissingDense);
    }
    if repeats == 0 {
        return Err(EvalError::NoRepeats);
    }
    for m in modes {
        m.validate()?;
    }
    cfg.validate().map_err(|e| EvalError::Report(e.to_string()))?;

    let mut times = vec![Vec::with_capacity(repeats); modes.len()];
    let mut transcripts = vec![Vec::new(); modes.len()];
    let mut frames = vec![0usize; modes.len()];
    let mut failures = vec![0usize; modes.len()];
    for repeat in 0..repeats {
        for (m, mode) in modes.iter().enumerate() {
            let mut total = Duration::ZERO;
            for utt in corpus {
                let began = Instant::now();
                let compressed = compress(&utt.posteriors, mode)?;
                let result = decode(&graph.fst, &compressed, cfg);
                let elapsed = began.elapsed();
                if result.is_ok() {
                    total += elapsed;
                }
                if repeat == 0 {
                    frames[m] += compressed.len();
                    match result {
                        Ok(r) => transcripts[m].push(graph.word_strings(&r.words).join(" ")),
                        Err(_) => {
                            failures[m] += 1;
                            transcripts[m].push(String::new());
                        }
                    }
                }
            }
            times[m].push(total);
        }
    }

    let n = corpus.len().max(1) as f64;
    let dense = modes.iter().position(|m| m.mode == CompressMode::Dense).expect("checked above");
    let dense_median = median(times[dense].clone());
    let dense_frames = frames[dense] as f64 / n;
    let rows = modes
        .iter()
        .enumerate()
        .map(|(m, mode)| {
            let med = median(times[m].clone());
            let mean_frames = frames[m] as f64 / n;
            let score = score_pairs(
                corpus.iter().map(|u| u.reference.as_str()).zip(transcripts[m].iter().map(String::as_str)),
                Unit::Char,
            );
            let speedup = if med == dense_median {
                1.0
            } else if med.is_zero() {
                f64::INFINITY
            } else {
                dense_median.as_secs_f64() / med.as_secs_f64()
            };
            BenchRow {
                mode: mode_label(mode),
                config: mode.clone(),
                cer: score.percent(),
                mean_frames,
                frame_reduction: if mean_frames > 0.0 { dense_frames / mean_frames } else { f64::INFINITY },
                speedup,
                median_seconds: med.as_secs_f64(),
                failures: failures[m],
                transcripts: std::mem::take(&mut transcripts[m]),
            }
        })
        .collect();
    Ok(BenchReport { utterances: corpus.len(), repeats, decoder: *cfg, rows })
}

#[derive(Serialize)]
struct CsvRow<'a> {
    mode: &'a str,
    cer: f64,
    mean_frames: f64,
    frame_reduction: f64,
    speedup: f64,
}

/// CSV with columns `mode,cer,mean_frames,frame_reduction,speedup`.
pub fn bench_report_csv(report: &BenchReport) -> Result<String, EvalError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &report.rows {
        w.serialize(CsvRow {
            mode: &r.mode,
            cer: r.cer,
            mean_frames: r.mean_frames,
            frame_reduction: r.frame_reduction,
            speedup: r.speedup,
        })
        .map_err(|e| EvalError::Report(e.to_string()))?;
    }
    finish_csv(w)
}

pub fn bench_report_json(report: &BenchReport) -> Result<String, EvalError> {
    serde_json::to_string_pretty(report).map_err(|e| EvalError::Report(e.to_string()))
}

/// One row per grid point, ready for plotting.
pub fn sweep_csv(rows: &[SweepRow]) -> Result<String, EvalError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| EvalError::Report(e.to_string()))?;
    }
    finish_csv(w)
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String, EvalError> {
    let bytes = w.into_inner().map_err(|e| EvalError::Report(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| EvalError::Report(e.to_string()))
}
