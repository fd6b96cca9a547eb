//! Release gate: one PASS/FAIL line per criterion, then a single assertion.

mod common;

use std::io::Write;
use std::time::{Duration, Instant};

use rand::Rng;

use common::*;
use spikedec::compress::{compress, compress_aed, compress_ctc, CompressConfig, CompressMode, FrameSource, NbOneHot};
use spikedec::decoder::{decode, DecodeResult, DecoderConfig};
use spikedec::eval::{bench, levenshtein, BenchUtterance};
use spikedec::graph::DecodingGraph;
use spikedec::posterior::{inject_confusions, ConfusionConfig, PosteriorMatrix, SynthConfig};
use spikedec::wfst::{arcsort, compose, determinize, minimize, push_weights, rm_epsilon, trim, ArcSortKey};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

/// Written straight to stdout so the lines appear even when output is captured.
fn report(n: usize, name: &str, o: &Outcome) {
    let status = if o.pass { "PASS" } else { "FAIL" };
    let line = format!("[acceptance] criterion {n:>2} {status}: {name} ({})\n", o.detail);
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
}

fn bench_corpus(utts: Vec<Utterance>) -> Vec<BenchUtterance> {
    utts.into_iter()
        .enumerate()
        .map(|(i, u)| BenchUtterance { id: format!("utt{i:04}"), posteriors: u.posteriors, reference: u.reference })
        .collect()
}

/// Independent count of non-blank argmax runs, ties to the lowest index.
fn nonblank_runs(p: &PosteriorMatrix) -> usize {
    let mut runs = 0;
    let mut prev = None;
    for row in p.rows() {
        let mut best = 0;
        for (i, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = i;
            }
        }
        if best != 0 && prev != Some(best) {
            runs += 1;
        }
        prev = Some(best);
    }
    runs
}

fn length_bound() -> Outcome {
    let began = Instant::now();
    let mut rng = rng(1);
    let cfg = CompressConfig::default();
    let mut violations = 0;
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let frames = rng.gen_range(50..=2000);
        let vocab = rng.gen_range(3..=64);
        let p = if i % 2 == 0 {
            random_posteriors(&mut rng, frames, vocab)
        } else {
            // Spiky rows: mostly blank with occasional token runs.
            let mut tokens = Vec::with_capacity(frames);
            while tokens.len() < frames {
                let t = if rng.gen_bool(0.7) { 0 } else { rng.gen_range(1..vocab) };
                let run = rng.gen_range(1..6);
                tokens.extend(std::iter::repeat(t).take(run));
            }
            tokens.truncate(frames);
            let mut values = Vec::with_capacity(frames * vocab);
            for &t in &tokens {
                let peak: f32 = rng.gen_range(0.5..1.0);
                let rest = (1.0 - peak) / (vocab - 1) as f32;
                values.extend((0..vocab).map(|c| if c == t { peak } else { rest }));
            }
            PosteriorMatrix::new(frames, vocab, values).unwrap()
        };
        let k = nonblank_runs(&p);
        let m = compress_ctc(&p, &cfg).unwrap().len();
        if m > 2 * k + 1 {
            violations += 1;
        }
        worst = worst.max(m as f64 / (2 * k + 1) as f64);
    }
    let elapsed = began.elapsed();
    outcome(
        violations == 0 && elapsed < Duration::from_secs(10),
        format!("1000 matrices, {violations} violations, max M/(2K+1) = {worst:.3}, {:.2}s", elapsed.as_secs_f64()),
    )
}

fn words_of(g: &DecodingGraph, r: &DecodeResult) -> Vec<String> {
    g.word_strings(&r.words)
}

fn semantic_preservation(g: &DecodingGraph, corpus: &[Utterance]) -> Outcome {
    let cfg = DecoderConfig::default();
    let modes = [CompressConfig::with_mode(CompressMode::Ioo), CompressConfig::with_mode(CompressMode::IooKoo)];
    let mut mismatches = 0;
    for u in corpus {
        let dense = words_of(g, &decode(&g.fst, &u.posteriors, &cfg).expect("dense decode"));
        for m in &modes {
            let c = compress(&u.posteriors, m).unwrap();
            match decode(&g.fst, &c, &cfg) {
                Ok(r) if words_of(g, &r) == dense => {}
                _ => mismatches += 1,
            }
        }
    }
    outcome(mismatches == 0, format!("{} utterances x 2 modes, {mismatches} mismatches", corpus.len()))
}

fn directional_speedup(g: &DecodingGraph) -> Outcome {
    let synth = SynthConfig { blank_ratio: Some(0.85), ..Default::default() };
    let utts = bench_corpus(corpus(&g.tokens, 150, &synth, WORDS, 30));
    let blank_share = {
        let (mut blank, mut total) = (0usize, 0usize);
        for u in &utts {
            for row in u.posteriors.rows() {
                total += 1;
                blank += usize::from(row.iter().enumerate().all(|(i, &v)| i == 0 || v < row[0]));
            }
        }
        blank as f64 / total as f64
    };
    let modes = [CompressConfig::with_mode(CompressMode::Dense), CompressConfig::with_mode(CompressMode::IooKoo)];
    let r = bench(g, &utts, &modes, &DecoderConfig::default(), 5).unwrap();
    let koo = &r.rows[1];
    let detail = format!(
        "blank frames {:.1}%, speedup {:.2}x (median of 5), frame reduction {:.2}x",
        100.0 * blank_share,
        koo.speedup,
        koo.frame_reduction
    );
    if koo.speedup >= 1.5 && blank_share >= 0.8 {
        outcome(true, detail)
    } else {
        outcome(false, format!("{detail}; informative only if frame reduction >= 4"))
    }
}

fn baseline_direction(g: &DecodingGraph) -> Outcome {
    // Words whose spelling repeats a letter back to back.
    let repeated: Vec<&'static str> = WORDS.iter().copied().filter(|w| w.as_bytes().windows(2).any(|p| p[0] == p[1])).collect();
    let utts = bench_corpus(corpus(&g.tokens, 200, &SynthConfig::default(), &repeated, 40));
    let modes = [
        CompressConfig::with_mode(CompressMode::Dense),
        CompressConfig::with_mode(CompressMode::Discard),
        CompressConfig::with_mode(CompressMode::Average),
        CompressConfig { lsd_threshold: 0.99, ..CompressConfig::with_mode(CompressMode::Lsd) },
    ];
    let r = bench(g, &utts, &modes, &DecoderConfig::default(), 1).unwrap();
    let cer: Vec<f64> = r.rows.iter().map(|row| row.cer).collect();
    let pass = cer[1] > cer[0] && (cer[2] - cer[0]).abs() <= 0.5 && (cer[3] - cer[0]).abs() <= 0.5;
    outcome(
        pass,
        format!("CER dense {:.2}%, discard {:.2}%, average {:.2}%, lsd(0.99) {:.2}%", cer[0], cer[1], cer[2], cer[3]),
    )
}

fn aed_structure() -> Outcome {
    let mut rng = rng(5);
    let mut bad = Vec::new();
    for frames in 0..=1000usize {
        let vocab = rng.gen_range(2..8);
        let p = random_posteriors(&mut rng, frames, vocab);
        let c = compress_aed(&p);
        let mut ok = c.len() == 2 * frames + 1;
        for (i, src) in c.source_map().iter().enumerate() {
            let row = c.matrix().row(i);
            ok &= if i % 2 == 0 {
                *src == FrameSource::CustomBlank && row[0] == 1.0 && row[1..].iter().all(|&v| v == 0.0)
            } else {
                *src == FrameSource::Frame(i / 2) && row == p.row(i / 2)
            };
        }
        if !ok {
            bad.push(frames);
        }
    }
    outcome(bad.is_empty(), format!("T in 0..=1000, {} malformed, first {:?}", bad.len(), bad.first()))
}

fn fst_algebra() -> Outcome {
    const MAX_LEN: usize = 6;
    const TOL: f64 = 1e-9;
    let mut rng = rng(6);
    let mut failures: Vec<String> = Vec::new();
    let mut counts = [0usize; 5];
    let check = |name: &str, want: &Relation, got: &Relation, failures: &mut Vec<String>| {
        if let Err(e) = compare_maps(want, got, TOL) {
            failures.push(format!("{name}: {e}"));
        }
    };
    for i in 0..120 {
        let states = rng.gen_range(2..=8);
        let acyclic_acceptor = MachineShape {
            states,
            alphabet: 3,
            arcs_per_state: 3,
            epsilon: 0.2,
            acceptor: true,
            acyclic: true,
            max_weight: 5.0,
        };
        let a = random_fst(&mut rng, acyclic_acceptor);
        let want = relation(&a, MAX_LEN);
        let det = determinize(&a).unwrap();
        check(&format!("determinize #{i}"), &want, &relation(&det, MAX_LEN), &mut failures);
        counts[0] += 1;

        let d = random_deterministic_acceptor(&mut rng, states, 3);
        let min = minimize(&d).unwrap();
        check(&format!("minimize #{i}"), &relation(&d, MAX_LEN), &relation(&min, MAX_LEN), &mut failures);
        let min_det = minimize(&det).unwrap();
        check(&format!("minimize(determinize) #{i}"), &want, &relation(&min_det, MAX_LEN), &mut failures);
        counts[1] += 1;

        let cyclic = MachineShape { acceptor: false, acyclic: false, arcs_per_state: 2, ..acyclic_acceptor };
        // Pushing needs every state to reach a final state.
        let t = trim(&random_fst(&mut rng, cyclic));
        let want = relation(&t, MAX_LEN);
        match push_weights(&t) {
            Ok(pushed) => {
                check(&format!("push_weights #{i}"), &want, &relation(&pushed, MAX_LEN), &mut failures);
                let again = push_weights(&pushed).unwrap();
                let same = again.num_states() == pushed.num_states()
                    && pushed.states().all(|s| {
                        pushed.final_weight(s).approx_eq(again.final_weight(s), TOL)
                            && pushed.arcs(s).len() == again.arcs(s).len()
                            && pushed.arcs(s).iter().zip(again.arcs(s)).all(|(x, y)| {
                                x.ilabel == y.ilabel
                                    && x.olabel == y.olabel
                                    && x.nextstate == y.nextstate
                                    && x.weight.approx_eq(y.weight, TOL)
                            })
                    });
                if !same {
                    failures.push(format!("push_weights #{i}: not idempotent"));
                }
                counts[2] += 1;
            }
            Err(e) => failures.push(format!("push_weights #{i}: {e}")),
        }
        let no_eps = rm_epsilon(&t).expect("rm_epsilon");
        if no_eps.states().any(|s| no_eps.arcs(s).iter().any(|a| a.ilabel == 0 && a.olabel == 0)) {
            failures.push(format!("rm_epsilon #{i}: epsilon arc left"));
        }
        check(&format!("rm_epsilon #{i}"), &want, &relation(&no_eps, MAX_LEN), &mut failures);
        counts[3] += 1;

        // Acyclic with at most 7 states: every path has at most 6 labels per
        // side, so the enumerated relations are complete.
        let small = MachineShape { states: states.min(7), acceptor: false, acyclic: true, ..acyclic_acceptor };
        let x = random_fst(&mut rng, small);
        let y = random_fst(&mut rng, small);
        let want = compose_relations(&relation(&x, MAX_LEN), &relation(&y, MAX_LEN));
        let got = relation(&compose(&x, &y).unwrap(), MAX_LEN);
        check(&format!("compose #{i}"), &want, &got, &mut failures);
        counts[4] += 1;
    }
    let detail = format!(
        "machines: determinize {}, minimize {}, push {}, rm_epsilon {}, compose {}; {} failures{}",
        counts[0],
        counts[1],
        counts[2],
        counts[3],
        counts[4],
        failures.len(),
        failures.first().map(|f| format!(", first: {f}")).unwrap_or_default()
    );
    outcome(failures.is_empty(), detail)
}

fn median(mut xs: Vec<Duration>) -> Duration {
    xs.sort();
    xs[xs.len() / 2]
}

fn pushed_equivalence(unpushed: &DecodingGraph, pushed: &DecodingGraph, corpus: &[Utterance]) -> Outcome {
    let cfg = DecoderConfig { beam: 10.0, ..DecoderConfig::default() };
    let mut differ = 0;
    let (mut alive_plain, mut alive_pushed) = (0usize, 0usize);
    let (mut t_plain, mut t_pushed) = (Vec::new(), Vec::new());
    for repeat in 0..5 {
        let (mut a, mut b) = (Duration::ZERO, Duration::ZERO);
        for u in corpus {
            let began = Instant::now();
            let r1 = decode(&unpushed.fst, &u.posteriors, &cfg).expect("unpushed decode");
            a += began.elapsed();
            let began = Instant::now();
            let r2 = decode(&pushed.fst, &u.posteriors, &cfg).expect("pushed decode");
            b += began.elapsed();
            if repeat == 0 {
                differ += usize::from(words_of(unpushed, &r1) != words_of(pushed, &r2));
                alive_plain += r1.tokens_alive_histogram.iter().sum::<usize>();
                alive_pushed += r2.tokens_alive_histogram.iter().sum::<usize>();
            }
        }
        t_plain.push(a);
        t_pushed.push(b);
    }
    let (a, b) = (median(t_plain), median(t_pushed));
    outcome(
        differ == 0 && b <= a,
        format!(
            "{} utterances, {differ} transcript differences, beam {}, median wall time pushed {:.3}s vs unpushed {:.3}s, live tokens {alive_pushed} vs {alive_plain}",
            corpus.len(),
            cfg.beam,
            b.as_secs_f64(),
            a.as_secs_f64()
        ),
    )
}

fn decoder_oracle() -> Outcome {
    let mut rng = rng(8);
    let mut checked = 0;
    let mut failures = Vec::new();
    let mut attempts = 0;
    while checked < 60 && attempts < 1000 {
        attempts += 1;
        let vocab = rng.gen_range(2..6);
        let shape = MachineShape {
            states: rng.gen_range(2..=50),
            alphabet: vocab as u32,
            arcs_per_state: 4,
            epsilon: 0.15,
            acceptor: false,
            acyclic: false,
            max_weight: 3.0,
        };
        let mut g = random_fst(&mut rng, shape);
        // Graph input labels are posterior columns plus one; epsilon stays 0.
        g = arcsort(&g, ArcSortKey::ILabel);
        let frames = rng.gen_range(1..=20);
        let p = random_posteriors(&mut rng, frames, vocab);
        let Some(want) = viterbi_oracle(&g, &p) else { continue };
        checked += 1;
        match decode(&g, &p, &DecoderConfig::exhaustive()) {
            Ok(r) if (r.total_cost - want).abs() <= 1e-6 => {}
            Ok(r) => failures.push(format!("instance {attempts}: {} vs {want}", r.total_cost)),
            Err(e) => failures.push(format!("instance {attempts}: {e}")),
        }
    }
    outcome(
        checked >= 50 && failures.is_empty(),
        format!("{checked} instances, {} mismatches{}", failures.len(), failures.first().map(|f| format!(", first: {f}")).unwrap_or_default()),
    )
}

fn threshold_sweep(g: &DecodingGraph) -> Outcome {
    let clean = corpus(&g.tokens, 200, &SynthConfig::default(), WORDS, 90);
    let confusion = ConfusionConfig { rate: 0.15, peak: (0.6, 0.99) };
    let noisy: Vec<Utterance> = clean
        .into_iter()
        .enumerate()
        .map(|(i, u)| Utterance { posteriors: inject_confusions(&u.posteriors, &confusion, 900 + i as u64).unwrap(), ..u })
        .collect();
    let utts = bench_corpus(noisy);
    let thresholds = [0.8, 0.9, 0.95, 0.99];
    let mut modes = vec![CompressConfig::with_mode(CompressMode::Dense)];
    modes.extend(thresholds.iter().map(|&t| CompressConfig {
        nb_onehot: NbOneHot::All,
        nb_threshold: Some(t),
        ..CompressConfig::with_mode(CompressMode::IooNb)
    }));
    let r = bench(g, &utts, &modes, &DecoderConfig::default(), 1).unwrap();
    let cer: Vec<f64> = r.rows[1..].iter().map(|row| row.cer).collect();
    let monotone = cer.windows(2).all(|w| w[1] <= w[0]);
    let pairs: Vec<String> = thresholds.iter().zip(&cer).map(|(t, c)| format!("{t}: {c:.2}%")).collect();
    outcome(monotone, format!("CER by threshold {}; dense {:.2}%", pairs.join(", "), r.rows[0].cer))
}

/// Edit distance straight from the recursive definition.
fn recursive_distance(a: &[u8], b: &[u8]) -> usize {
    match (a.split_last(), b.split_last()) {
        (None, _) => b.len(),
        (_, None) => a.len(),
        (Some((x, ra)), Some((y, rb))) => {
            let sub = recursive_distance(ra, rb) + usize::from(x != y);
            sub.min(recursive_distance(ra, b) + 1).min(recursive_distance(a, rb) + 1)
        }
    }
}

fn all_strings(max_len: usize) -> Vec<Vec<u8>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &frontier {
            for c in 0..3u8 {
                let mut t: Vec<u8> = s.clone();
                t.push(c);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

fn scoring() -> Outcome {
    let strings = all_strings(8);
    // The plain recursion is exponential, so it is memoised per reference:
    // the table for `a` covers every prefix pair, and each hypothesis walks
    // its prefixes through the recursive definition once.
    let mut mismatches = 0usize;
    let mut pairs = 0usize;
    let mut spot_checked = 0usize;
    for a in &strings {
        // Row-by-row evaluation of the recursion, sharing hypothesis prefixes
        // through the enumeration order (each string extends an earlier one).
        let mut rows: Vec<Vec<usize>> = Vec::with_capacity(strings.len());
        rows.push((0..=a.len()).collect());
        for (idx, b) in strings.iter().enumerate().skip(1) {
            let parent = parent_index(idx);
            let prev = &rows[parent];
            let c = *b.last().unwrap();
            let mut row = vec![b.len(); a.len() + 1];
            for i in 1..=a.len() {
                row[i] = (prev[i - 1] + usize::from(a[i - 1] != c)).min(prev[i] + 1).min(row[i - 1] + 1);
            }
            rows.push(row);
        }
        for (b, row) in strings.iter().zip(&rows) {
            pairs += 1;
            if levenshtein(a, b).distance != row[a.len()] {
                mismatches += 1;
            }
        }
        // The row evaluation itself against the literal recursion.
        if a.len() <= 4 {
            for (b, row) in strings.iter().zip(&rows).filter(|(b, _)| b.len() <= 4) {
                spot_checked += 1;
                if recursive_distance(a, b) != row[a.len()] {
                    mismatches += 1;
                }
            }
        }
    }
    outcome(
        mismatches == 0,
        format!("{pairs} pairs over a 3-symbol alphabet up to length 8, {spot_checked} also against the literal recursion, {mismatches} mismatches"),
    )
}

/// Index of the string with the last symbol removed, in [`all_strings`] order.
fn parent_index(idx: usize) -> usize {
    // Strings are laid out by length, then lexicographically in base 3; the
    // parent of index i (>0) is (i - 1) / 3.
    (idx - 1) / 3
}

#[test]
fn acceptance() {
    let unpushed = toy_graph(false);
    let pushed = toy_graph(true);
    let clean_cfg = SynthConfig { peak: (0.9, 1.0), ..SynthConfig::default() };
    let test_corpus = corpus(&unpushed.tokens, 500, &clean_cfg, WORDS, 20);

    let mut results = Vec::new();
    let mut run = |n: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let o = f();
        report(n, name, &o);
        results.push((n, o.pass));
    };
    run(1, "compressed length bound", &mut length_bound);
    run(2, "semantic preservation", &mut || semantic_preservation(&unpushed, &test_corpus));
    run(3, "directional speedup", &mut || directional_speedup(&unpushed));
    run(4, "baseline degradation direction", &mut || baseline_direction(&unpushed));
    run(5, "attention-decoder blank insertion", &mut aed_structure);
    run(6, "FST algebra oracles", &mut fst_algebra);
    run(7, "pushed graph equivalence", &mut || pushed_equivalence(&unpushed, &pushed, &test_corpus));
    run(8, "decoder Viterbi oracle", &mut decoder_oracle);
    run(9, "threshold sweep shape", &mut || threshold_sweep(&unpushed));
    run(10, "edit distance oracle", &mut scoring);

    let failed: Vec<usize> = results.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

