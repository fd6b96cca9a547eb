mod files;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use files::{create_dir, list_corpus, load_graph, read_text, save_graph, save_matrix, write_atomic};
use spikedec::compress::{compress, CompressConfig, CompressedPosteriors, CompressMode, KooStrategy, NbOneHot};
use spikedec::decoder::{decode_batch, sweep_params, DecodeResult, DecoderConfig, Frames, SweepGrid};
use spikedec::eval::{
    bench, bench_report_csv, bench_report_json, format_transcript, parse_transcript, score_corpus, sweep_csv,
    BenchUtterance, Unit,
};
use spikedec::graph::{DecodingGraph, TokenTable};
use spikedec::posterior::{inject_confusions, PosteriorMatrix, synth_posteriors, ConfusionConfig, LabelSequence, SynthConfig};
use spikedec::wfst::SymbolTable;

#[derive(Parser)]
#[command(name = "spikedec", version, about = "CTC posterior compression and WFST decoding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a TLG decoding graph from a lexicon and an ARPA language model.
    BuildGraph(BuildGraphArgs),
    /// Generate synthetic posteriors from label sequences.
    Synth(SynthArgs),
    /// Compress a posterior corpus.
    Compress(CompressArgs),
    /// Decode a posterior corpus against a graph.
    Decode(DecodeArgs),
    /// Score hypotheses against references.
    Score(ScoreArgs),
    /// Compare compression modes on one corpus.
    Bench(BenchArgs),
    /// Decode once per point of a beam / lattice-beam / max-active grid.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct BuildGraphArgs {
    #[arg(long)]
    lexicon: PathBuf,
    #[arg(long)]
    arpa: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Push weights toward the start state after determinization.
    #[arg(long)]
    push: bool,
    /// Token symbol table; inferred from the lexicon when absent.
    #[arg(long)]
    tokens: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// One utterance per line: `utt_id<TAB>tokens` or just `tokens`.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Resolve tokens as symbols of this table; otherwise they are column indices.
    #[arg(long, conflicts_with = "vocab")]
    tokens: Option<PathBuf>,
    /// Posterior width when tokens are column indices.
    #[arg(long)]
    vocab: Option<usize>,
    #[arg(long, default_value = "1:3", value_parser = parse_usize_range)]
    spike_len: (usize, usize),
    #[arg(long, default_value = "1:4", value_parser = parse_usize_range)]
    blank_run: (usize, usize),
    #[arg(long, default_value = "0.9:1.0", value_parser = parse_f64_range)]
    peak: (f64, f64),
    #[arg(long, default_value_t = 0.0)]
    noise_floor: f64,
    /// Target fraction of blank frames; overrides --blank-run.
    #[arg(long)]
    blank_ratio: Option<f64>,
    /// Chance that a token spike is replaced by a wrong token.
    #[arg(long)]
    confusion_rate: Option<f64>,
    #[arg(long, default_value = "0.6:0.99", value_parser = parse_f64_range)]
    confusion_peak: (f64, f64),
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Clone)]
struct ModeArgs {
    #[arg(long, default_value = "max")]
    koo_strategy: KooStrategy,
    #[arg(long, default_value_t = 1)]
    blanks_per_region: usize,
    /// One-hot rewrite of non-blank frames (ioo_nb); defaults to `all` there.
    #[arg(long)]
    nb_onehot: Option<NbOneHot>,
    /// Peak needed for the one-hot rewrite; defaults to 0.99 with ioo_nb.
    #[arg(long)]
    nb_threshold: Option<f64>,
    #[arg(long, default_value_t = 0.99)]
    lsd_threshold: f64,
    #[arg(long, default_value_t = 1)]
    swd_window: usize,
}

impl ModeArgs {
    fn config(&self, mode: CompressMode) -> Result<CompressConfig, String> {
        let nb = mode == CompressMode::IooNb;
        let nb_onehot = self.nb_onehot.unwrap_or(if nb { NbOneHot::All } else { NbOneHot::Off });
        let nb_threshold = if nb { self.nb_threshold.or(Some(0.99)) } else { self.nb_threshold };
        let cfg = CompressConfig {
            mode,
            koo_strategy: self.koo_strategy,
            blanks_per_region: self.blanks_per_region,
            nb_onehot,
            nb_threshold,
            lsd_threshold: self.lsd_threshold,
            swd_window: self.swd_window,
        };
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

#[derive(Args, Clone, Copy)]
struct DecodeFlags {
    #[arg(long, default_value_t = DecoderConfig::default().beam)]
    beam: f64,
    #[arg(long, default_value_t = DecoderConfig::default().lattice_beam)]
    lattice_beam: f64,
    #[arg(long, default_value_t = DecoderConfig::default().max_active)]
    max_active: usize,
    #[arg(long, default_value_t = DecoderConfig::default().acoustic_scale)]
    acoustic_scale: f64,
    /// Worker threads across utterances (bench always times one thread).
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

impl DecodeFlags {
    fn config(&self) -> Result<DecoderConfig, String> {
        let cfg = DecoderConfig {
            beam: self.beam,
            lattice_beam: self.lattice_beam,
            max_active: self.max_active,
            acoustic_scale: self.acoustic_scale,
        };
        cfg.validate().map_err(|e| e.to_string())?;
        if self.jobs == 0 {
            return Err("--jobs must be at least 1".into());
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct CompressArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value = "ioo_koo")]
    mode: CompressMode,
    #[command(flatten)]
    modes: ModeArgs,
}

#[derive(Args)]
struct DecodeArgs {
    /// Directory written by build-graph.
    #[arg(long)]
    graph: PathBuf,
    /// Corpus directory; `.map` files next to matrices mark compressed input.
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    decoder: DecodeFlags,
    /// Results file (one JSON object per line); stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write `utt_id<TAB>words` hypotheses here.
    #[arg(long)]
    hyps_out: Option<PathBuf>,
    /// Include the frame alignment in each result.
    #[arg(long)]
    alignment: bool,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    refs: PathBuf,
    #[arg(long)]
    hyps: PathBuf,
    #[arg(long, default_value = "char", value_parser = parse_unit)]
    unit: Unit,
    /// Full per-utterance report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Dense posterior corpus.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    refs: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "dense,ioo,ioo_koo,discard,average,lsd,swd")]
    modes: Vec<CompressMode>,
    #[command(flatten)]
    mode_flags: ModeArgs,
    #[command(flatten)]
    decoder: DecodeFlags,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    /// Receives bench.csv and bench.json.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    refs: PathBuf,
    /// Compress every utterance with this mode before decoding.
    #[arg(long, default_value = "dense")]
    mode: CompressMode,
    #[command(flatten)]
    mode_flags: ModeArgs,
    #[arg(long, value_delimiter = ',', default_value = "4,8,12,16")]
    beams: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "8")]
    lattice_beams: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "100,1000,5000")]
    max_actives: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    acoustic_scale: f64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Plot-ready CSV, one row per grid point.
    #[arg(long)]
    out: PathBuf,
}

fn parse_range<T: std::str::FromStr>(s: &str) -> Result<(T, T), String> {
    let (lo, hi) = s.split_once(':').unwrap_or((s, s));
    let parse = |v: &str| v.trim().parse::<T>().map_err(|_| format!("expected `lo:hi`, got `{s}`"));
    Ok((parse(lo)?, parse(hi)?))
}

fn parse_usize_range(s: &str) -> Result<(usize, usize), String> {
    parse_range(s)
}

fn parse_f64_range(s: &str) -> Result<(f64, f64), String> {
    parse_range(s)
}

fn parse_unit(s: &str) -> Result<Unit, String> {
    match s {
        "char" => Ok(Unit::Char),
        "word" => Ok(Unit::Word),
        _ => Err(format!("unit must be char or word, got `{s}`")),
    }
}

/// Failure classes, mapped onto exit codes.
enum Failure {
    Usage(String),
    Data(anyhow::Error),
    Decode(usize),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

fn usage<T>(r: Result<T, String>) -> Result<T, Failure> {
    r.map_err(Failure::Usage)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::BuildGraph(a) => build_graph(a),
        Command::Synth(a) => synth(a),
        Command::Compress(a) => compress_cmd(a),
        Command::Decode(a) => decode_cmd(a),
        Command::Score(a) => score(a),
        Command::Bench(a) => bench_cmd(a),
        Command::Sweep(a) => sweep(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {}", error_chain(&e));
            ExitCode::from(2)
        }
        Err(Failure::Decode(n)) => {
            eprintln!("error: {n} utterance(s) failed to decode");
            ExitCode::from(3)
        }
    }
}

/// `outer: inner: ...`, skipping causes already spelled out by their parent.
fn error_chain(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if out.ends_with(&text) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&text);
    }
    out
}

fn build_graph(a: BuildGraphArgs) -> Result<(), Failure> {
    let lexicon = read_text(&a.lexicon)?;
    let arpa = read_text(&a.arpa)?;
    let tokens = match &a.tokens {
        Some(p) => {
            let table = SymbolTable::parse(&read_text(p)?).with_context(|| p.display().to_string())?;
            Some(TokenTable::from_symbols(table).with_context(|| p.display().to_string())?)
        }
        None => None,
    };
    let graph = DecodingGraph::build(&lexicon, &arpa, tokens.as_ref(), a.push).context("building graph")?;
    save_graph(&a.out_dir, &graph)?;
    for s in &graph.manifest.stages {
        eprintln!("{:<16} {:>8} states {:>9} arcs", s.stage, s.states, s.arcs);
    }
    Ok(())
}

fn synth(a: SynthArgs) -> Result<(), Failure> {
    let (vocab, table) = match (&a.tokens, a.vocab) {
        (Some(p), _) => {
            let table = SymbolTable::parse(&read_text(p)?).with_context(|| p.display().to_string())?;
            let table = TokenTable::from_symbols(table).with_context(|| p.display().to_string())?;
            (table.vocab_size(), Some(table))
        }
        (None, Some(v)) => (v, None),
        (None, None) => return Err(Failure::Usage("synth needs --tokens or --vocab".into())),
    };
    let cfg = SynthConfig {
        spike_len: a.spike_len,
        blank_run: a.blank_run,
        peak: a.peak,
        noise_floor: a.noise_floor,
        blank_ratio: a.blank_ratio,
    };
    usage(cfg.validate(vocab).map_err(|e| e.to_string()))?;
    let confusion = a.confusion_rate.map(|rate| ConfusionConfig { rate, peak: a.confusion_peak });

    let text = read_text(&a.labels)?;
    let mut utterances = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (id, body) = match line.split_once('\t') {
            Some((id, body)) => (id.trim().to_owned(), body),
            None => (format!("utt{:04}", utterances.len()), line),
        };
        let columns = body
            .split_whitespace()
            .map(|t| match &table {
                Some(table) => table
                    .real_token(t)
                    .map(TokenTable::column_for_label)
                    .ok_or_else(|| anyhow!("{}:{}: unknown token `{t}`", a.labels.display(), n + 1)),
                None => t.parse::<usize>().map_err(|_| anyhow!("{}:{}: bad token index `{t}`", a.labels.display(), n + 1)),
            })
            .collect::<Result<Vec<_>>>()?;
        let labels = LabelSequence::new(columns, vocab).with_context(|| format!("{}:{}", a.labels.display(), n + 1))?;
        utterances.push((id, labels));
    }
    create_dir(&a.out_dir)?;
    for (i, (id, labels)) in utterances.iter().enumerate() {
        let seed = a.seed.wrapping_add(i as u64);
        let mut p = synth_posteriors(labels, &cfg, vocab, seed).with_context(|| id.clone())?;
        if let Some(c) = &confusion {
            p = inject_confusions(&p, c, seed ^ 0x5eed).with_context(|| id.clone())?;
        }
        save_matrix(&a.out_dir, id, &p)?;
    }
    eprintln!("wrote {} utterance(s) to {}", utterances.len(), a.out_dir.display());
    Ok(())
}

fn compress_cmd(a: CompressArgs) -> Result<(), Failure> {
    let cfg = usage(a.modes.config(a.mode))?;
    let corpus = list_corpus(&a.input)?;
    create_dir(&a.out_dir)?;
    let (mut before, mut after) = (0usize, 0usize);
    for entry in &corpus {
        let p = entry.load()?;
        let c = compress(&p, &cfg).with_context(|| entry.id.clone())?;
        before += p.frames();
        after += c.len();
        save_matrix(&a.out_dir, &entry.id, c.matrix())?;
        write_atomic(&a.out_dir.join(format!("{}.map", entry.id)), c.source_map_text().as_bytes())?;
    }
    let summary = serde_json::json!({
        "mode": cfg.mode.to_string(),
        "utterances": corpus.len(),
        "frames_in": before,
        "frames_out": after,
    });
    eprintln!("{summary}");
    Ok(())
}

#[derive(Serialize)]
struct AlignmentEntry {
    frame: usize,
    source: String,
    token: String,
}

#[derive(Serialize)]
struct ResultLine<'a> {
    id: &'a str,
    words: Vec<String>,
    cost: f64,
    frames: usize,
    wall_time_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    alignment: Option<Vec<AlignmentEntry>>,
}

fn result_line<'a>(graph: &DecodingGraph, id: &'a str, r: &DecodeResult, alignment: bool) -> ResultLine<'a> {
    ResultLine {
        id,
        words: graph.word_strings(&r.words),
        cost: r.total_cost,
        frames: r.frames_processed,
        wall_time_ms: r.wall_time.as_secs_f64() * 1e3,
        alignment: alignment.then(|| {
            r.alignment
                .iter()
                .map(|a| AlignmentEntry {
                    frame: a.frame,
                    source: a.source.to_string(),
                    token: graph.tokens.name(a.token).unwrap_or("?").to_owned(),
                })
                .collect()
        }),
    }
}

enum Loaded {
    Dense(PosteriorMatrix),
    Compressed(CompressedPosteriors),
}

fn decode_cmd(a: DecodeArgs) -> Result<(), Failure> {
    let cfg = usage(a.decoder.config())?;
    let graph = load_graph(&a.graph)?;
    let corpus = list_corpus(&a.input)?;
    let began = Instant::now();

    let mut loaded = Vec::with_capacity(corpus.len());
    for entry in &corpus {
        loaded.push(match entry.load_compressed()? {
            Some(c) => Loaded::Compressed(c),
            None => Loaded::Dense(entry.load()?),
        });
    }
    let frames: Vec<Frames> = loaded
        .iter()
        .map(|l| match l {
            Loaded::Dense(p) => Frames::from(p),
            Loaded::Compressed(c) => Frames::from(c),
        })
        .collect();
    let batch = decode_batch(&graph.fst, &frames, &cfg, a.decoder.jobs);

    let mut out = String::new();
    let mut hyps = Vec::new();
    let mut failed = 0;
    for (entry, r) in corpus.iter().zip(&batch.results) {
        match r {
            Ok(r) => {
                out.push_str(&serde_json::to_string(&result_line(&graph, &entry.id, r, a.alignment)).context("serializing")?);
                out.push('\n');
                hyps.push((entry.id.clone(), graph.word_strings(&r.words).join(" ")));
            }
            Err(e) => {
                failed += 1;
                eprintln!("{}: decode failed: {e}", entry.id);
            }
        }
    }
    match &a.out {
        Some(path) => write_atomic(path, out.as_bytes())?,
        None => std::io::stdout().write_all(out.as_bytes()).context("writing results")?,
    }
    if let Some(path) = &a.hyps_out {
        write_atomic(path, format_transcript(&hyps).as_bytes())?;
    }
    let summary = serde_json::json!({
        "utterances": corpus.len(),
        "decoded": corpus.len() - failed,
        "failed": failed,
        "wall_time_s": began.elapsed().as_secs_f64(),
    });
    eprintln!("{summary}");
    if failed > 0 {
        return Err(Failure::Decode(failed));
    }
    Ok(())
}

fn score(a: ScoreArgs) -> Result<(), Failure> {
    let refs = parse_transcript(&read_text(&a.refs)?).with_context(|| a.refs.display().to_string())?;
    let hyps = parse_transcript(&read_text(&a.hyps)?).with_context(|| a.hyps.display().to_string())?;
    let report = score_corpus(&refs, &hyps, a.unit).context("scoring")?;
    let summary = serde_json::json!({
        "unit": a.unit,
        "utterances": report.utterances.len(),
        "edits": report.total_edits,
        "reference_len": report.total_reference_len,
        "rate": report.rate,
        "percent": report.percent(),
    });
    println!("{summary}");
    if let Some(path) = &a.report {
        write_atomic(path, serde_json::to_string_pretty(&report).context("serializing")?.as_bytes())?;
    }
    Ok(())
}

/// Dense corpus paired with references by utterance id.
fn load_scored_corpus(input: &Path, refs: &Path) -> Result<Vec<BenchUtterance>> {
    let refs = parse_transcript(&read_text(refs)?).with_context(|| refs.display().to_string())?;
    let corpus = list_corpus(input)?;
    let mut out = Vec::with_capacity(corpus.len());
    for entry in &corpus {
        let Some((_, reference)) = refs.iter().find(|(id, _)| *id == entry.id) else {
            bail!("utterance {} has no reference", entry.id);
        };
        out.push(BenchUtterance { id: entry.id.clone(), posteriors: entry.load()?, reference: reference.clone() });
    }
    if let Some((id, _)) = refs.iter().find(|(id, _)| !corpus.iter().any(|e| e.id == *id)) {
        bail!("reference {id} has no posteriors in {}", input.display());
    }
    Ok(out)
}

fn bench_cmd(a: BenchArgs) -> Result<(), Failure> {
    let cfg = usage(a.decoder.config())?;
    if a.repeats == 0 {
        return Err(Failure::Usage("--repeats must be at least 1".into()));
    }
    if !a.modes.contains(&CompressMode::Dense) {
        return Err(Failure::Usage("--modes must include dense".into()));
    }
    let modes = usage(a.modes.iter().map(|&m| a.mode_flags.config(m)).collect::<Result<Vec<_>, _>>())?;
    let graph = load_graph(&a.graph)?;
    let corpus = load_scored_corpus(&a.input, &a.refs)?;
    let report = bench(&graph, &corpus, &modes, &cfg, a.repeats).context("bench")?;
    let csv = bench_report_csv(&report).context("bench")?;
    create_dir(&a.out_dir)?;
    write_atomic(&a.out_dir.join("bench.csv"), csv.as_bytes())?;
    write_atomic(&a.out_dir.join("bench.json"), bench_report_json(&report).context("bench")?.as_bytes())?;
    print!("{csv}");
    let failed: usize = report.rows.iter().map(|r| r.failures).sum();
    for r in report.rows.iter().filter(|r| r.failures > 0) {
        eprintln!("{}: {} decode failure(s)", r.mode, r.failures);
    }
    if failed > 0 {
        return Err(Failure::Decode(failed));
    }
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<(), Failure> {
    let base = DecoderConfig { acoustic_scale: a.acoustic_scale, ..DecoderConfig::default() };
    usage(base.validate().map_err(|e| e.to_string()))?;
    if a.jobs == 0 {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }
    let mode = usage(a.mode_flags.config(a.mode))?;
    let grid = SweepGrid { beams: a.beams.clone(), lattice_beams: a.lattice_beams.clone(), max_actives: a.max_actives.clone() };
    let graph = load_graph(&a.graph)?;
    let corpus = load_scored_corpus(&a.input, &a.refs)?;
    let compressed = corpus
        .iter()
        .map(|u| compress(&u.posteriors, &mode).with_context(|| u.id.clone()))
        .collect::<Result<Vec<_>>>()?;
    let frames: Vec<Frames> = compressed.iter().map(Frames::from).collect();
    let references: Vec<String> = corpus.iter().map(|u| u.reference.clone()).collect();
    let rows = sweep_params(&graph, &frames, &references, &grid, &base, a.jobs).map_err(|e| Failure::Usage(e.to_string()))?;
    write_atomic(&a.out, sweep_csv(&rows).context("sweep")?.as_bytes())?;
    let failed: usize = rows.iter().map(|r| r.failures).sum();
    eprintln!("{} grid point(s) written to {}", rows.len(), a.out.display());
    if failed > 0 {
        return Err(Failure::Decode(failed));
    }
    Ok(())
}
