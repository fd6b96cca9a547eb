//! Shared fixtures: a toy lexicon and bigram model, seeded corpora, random
//! machines, and brute-force oracles that share no code with the library.
#![allow(dead_code)]

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spikedec::graph::{DecodingGraph, TokenTable};
use spikedec::posterior::{synth_posteriors, LabelSequence, PosteriorMatrix, SynthConfig};
use spikedec::wfst::{Arc, Fst, Label, StateId};

/// Words spelled letter by letter; several need a blank between repeated
/// letters (`book`, `see`, `all`, ...).
pub const WORDS: &[&str] = &[
    "cat", "dog", "bird", "fish", "tree", "book", "see", "all", "too", "add", "egg", "ball", "tell", "red", "blue",
    "sun", "moon", "star", "rain", "snow", "big", "little", "good", "look", "sleep", "keep", "will", "green", "cool",
    "feel",
];

pub fn lexicon_text() -> String {
    let mut out = String::new();
    for w in WORDS {
        let spelled: Vec<String> = w.chars().map(String::from).collect();
        writeln!(out, "{w}\t{}", spelled.join(" ")).unwrap();
    }
    out
}

/// Bigram ARPA text over [`WORDS`]. Every explicit bigram is more likely than
/// its backed-off estimate, so the grammar acceptor's best path scores a
/// sentence exactly as the model does.
pub fn bigram_arpa(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unigram = -((WORDS.len() + 1) as f64).log10();
    let mut bigrams = Vec::new();
    let histories = std::iter::once("<s>").chain(WORDS.iter().copied());
    for h in histories {
        let mut successors: Vec<&str> = WORDS.iter().copied().chain(std::iter::once("</s>")).collect();
        successors.shuffle(&mut rng);
        for w in successors.into_iter().take(6) {
            if h == "<s>" && w == "</s>" {
                continue;
            }
            bigrams.push((h, w, rng.gen_range(0.03f64..0.08).log10()));
        }
    }
    let mut out = String::new();
    writeln!(out, "\\data\\\nngram 1={}\nngram 2={}\n\n\\1-grams:", WORDS.len() + 2, bigrams.len()).unwrap();
    writeln!(out, "-99\t<s>\t-0.3").unwrap();
    for w in WORDS {
        writeln!(out, "{unigram:.6}\t{w}\t-0.3").unwrap();
    }
    writeln!(out, "{unigram:.6}\t</s>\n\n\\2-grams:").unwrap();
    for (h, w, p) in &bigrams {
        writeln!(out, "{p:.6}\t{h} {w}").unwrap();
    }
    out.push_str("\n\\end\\\n");
    out
}

pub fn toy_graph(use_pushing: bool) -> DecodingGraph {
    DecodingGraph::build(&lexicon_text(), &bigram_arpa(7), None, use_pushing).expect("toy graph builds")
}

/// Posterior columns spelling `sentence` letter by letter.
pub fn spell(tokens: &TokenTable, sentence: &[&str]) -> Vec<usize> {
    sentence
        .iter()
        .flat_map(|w| w.chars())
        .map(|c| TokenTable::column_for_label(tokens.real_token(&c.to_string()).expect("letter is a token")))
        .collect()
}

pub struct Utterance {
    pub reference: String,
    pub posteriors: PosteriorMatrix,
}

pub fn random_sentence(rng: &mut ChaCha8Rng, words: &[&'static str], len: (usize, usize)) -> Vec<&'static str> {
    let n = rng.gen_range(len.0..=len.1);
    (0..n).map(|_| *words.choose(rng).expect("non-empty")).collect()
}

pub fn corpus(tokens: &TokenTable, n: usize, cfg: &SynthConfig, words: &[&'static str], seed: u64) -> Vec<Utterance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let sentence = random_sentence(&mut rng, words, (1, 4));
            let labels = LabelSequence::new(spell(tokens, &sentence), tokens.vocab_size()).expect("valid labels");
            let posteriors = synth_posteriors(&labels, cfg, tokens.vocab_size(), seed ^ ((i as u64) << 16)).expect("synth");
            Utterance { reference: sentence.join(" "), posteriors }
        })
        .collect()
}

#[derive(Clone, Copy, Debug)]
pub struct MachineShape {
    pub states: usize,
    pub alphabet: Label,
    pub arcs_per_state: usize,
    /// Chance that each side of an arc is epsilon.
    pub epsilon: f64,
    pub acceptor: bool,
    /// Arcs only go to higher-numbered states.
    pub acyclic: bool,
    pub max_weight: f64,
}

pub fn random_fst(rng: &mut ChaCha8Rng, shape: MachineShape) -> Fst {
    let mut f = Fst::new();
    f.add_states(shape.states);
    f.set_start(0).unwrap();
    let label = |rng: &mut ChaCha8Rng| if rng.gen_bool(shape.epsilon) { 0 } else { rng.gen_range(1..=shape.alphabet) };
    for s in 0..shape.states {
        if shape.acyclic && s + 1 == shape.states {
            break;
        }
        for _ in 0..rng.gen_range(1..=shape.arcs_per_state) {
            let next = if shape.acyclic { rng.gen_range(s + 1..shape.states) } else { rng.gen_range(0..shape.states) };
            let il = label(rng);
            let ol = if shape.acceptor { il } else { label(rng) };
            let w = rng.gen_range(0.0..shape.max_weight);
            f.add_arc(s as StateId, Arc::new(il, ol, w, next as StateId)).unwrap();
        }
    }
    let last = (shape.states - 1) as StateId;
    f.set_final(last, rng.gen_range(0.0..shape.max_weight)).unwrap();
    for s in 0..shape.states as StateId - 1 {
        if rng.gen_bool(0.3) {
            f.set_final(s, rng.gen_range(0.0..shape.max_weight)).unwrap();
        }
    }
    f
}

/// Acceptor with at most one arc per (state, label) and no epsilons.
pub fn random_deterministic_acceptor(rng: &mut ChaCha8Rng, states: usize, alphabet: Label) -> Fst {
    let mut f = Fst::new();
    f.add_states(states);
    f.set_start(0).unwrap();
    for s in 0..states as StateId {
        for l in 1..=alphabet {
            if rng.gen_bool(0.6) {
                // Coarse weights make equivalent states likely.
                let w = rng.gen_range(0..4) as f64 * 0.5;
                f.add_arc(s, Arc::new(l, l, w, rng.gen_range(0..states) as StateId)).unwrap();
            }
        }
        if rng.gen_bool(0.4) {
            f.set_final(s, rng.gen_range(0..3) as f64).unwrap();
        }
    }
    f
}

pub type Relation = HashMap<(Vec<Label>, Vec<Label>), f64>;

/// Every (input, output) pair with both sides at most `max_len` labels, with
/// its minimum path weight. Label-correcting search over
/// (state, input so far, output so far); needs no negative cycles.
pub fn relation(f: &Fst, max_len: usize) -> Relation {
    type Config = (StateId, Vec<Label>, Vec<Label>);
    let mut best: HashMap<Config, f64> = HashMap::new();
    let mut queue = VecDeque::new();
    let Some(start) = f.start() else { return Relation::new() };
    let init: Config = (start, Vec::new(), Vec::new());
    best.insert(init.clone(), 0.0);
    queue.push_back(init);
    while let Some(cfg) = queue.pop_front() {
        let cost = best[&cfg];
        for a in f.arcs(cfg.0) {
            if a.weight.is_zero() {
                continue;
            }
            let mut input = cfg.1.clone();
            let mut output = cfg.2.clone();
            if a.ilabel != 0 {
                input.push(a.ilabel);
            }
            if a.olabel != 0 {
                output.push(a.olabel);
            }
            if input.len() > max_len || output.len() > max_len {
                continue;
            }
            let next = (a.nextstate, input, output);
            let c = cost + a.weight.value();
            if best.get(&next).map_or(true, |&old| c < old - 1e-15) {
                best.insert(next.clone(), c);
                queue.push_back(next);
            }
        }
    }
    let mut rel = Relation::new();
    for ((s, i, o), c) in best {
        let fw = f.final_weight(s);
        if fw.is_zero() {
            continue;
        }
        let total = c + fw.value();
        let slot = rel.entry((i, o)).or_insert(f64::INFINITY);
        *slot = slot.min(total);
    }
    rel
}

/// Input-side projection: each input string's best weight over all outputs.
pub fn acceptance_weights(rel: &Relation) -> HashMap<Vec<Label>, f64> {
    let mut out: HashMap<Vec<Label>, f64> = HashMap::new();
    for ((i, _), &w) in rel {
        let slot = out.entry(i.clone()).or_insert(f64::INFINITY);
        *slot = slot.min(w);
    }
    out
}

/// First disagreement between two weighted string maps, if any.
pub fn compare_maps<K: std::fmt::Debug + Eq + std::hash::Hash>(
    want: &HashMap<K, f64>,
    got: &HashMap<K, f64>,
    tol: f64,
) -> Result<(), String> {
    for (k, w) in want {
        match got.get(k) {
            None => return Err(format!("missing {k:?} (want {w})")),
            Some(g) if (g - w).abs() > tol => return Err(format!("{k:?}: want {w}, got {g}")),
            _ => {}
        }
    }
    if let Some(k) = got.keys().find(|k| !want.contains_key(*k)) {
        return Err(format!("extra {k:?} ({})", got[k]));
    }
    Ok(())
}

/// Composition oracle over enumerated relations: min over the middle string.
pub fn compose_relations(a: &Relation, b: &Relation) -> Relation {
    let mut by_input: HashMap<&[Label], Vec<(&[Label], f64)>> = HashMap::new();
    for ((mid, out), &w) in b {
        by_input.entry(mid.as_slice()).or_default().push((out.as_slice(), w));
    }
    let mut rel = Relation::new();
    for ((input, mid), &wa) in a {
        for &(out, wb) in by_input.get(mid.as_slice()).into_iter().flatten() {
            let slot = rel.entry((input.clone(), out.to_vec())).or_insert(f64::INFINITY);
            *slot = slot.min(wa + wb);
        }
    }
    rel
}

/// Exact Viterbi cost of `p` through `graph`: a full table over states per
/// frame, with epsilon arcs relaxed to a fixpoint. `None` when no path ends
/// in a final state.
pub fn viterbi_oracle(graph: &Fst, p: &PosteriorMatrix) -> Option<f64> {
    let n = graph.num_states();
    let mut dist = vec![f64::INFINITY; n];
    dist[graph.start()? as usize] = 0.0;
    let relax_epsilons = |dist: &mut Vec<f64>| loop {
        let mut changed = false;
        for s in 0..n {
            if dist[s].is_infinite() {
                continue;
            }
            for a in graph.arcs(s as StateId).iter().filter(|a| a.ilabel == 0) {
                let c = dist[s] + a.weight.value();
                if c < dist[a.nextstate as usize] {
                    dist[a.nextstate as usize] = c;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    };
    relax_epsilons(&mut dist);
    for t in 0..p.frames() {
        let mut next = vec![f64::INFINITY; n];
        for s in 0..n {
            if dist[s].is_infinite() {
                continue;
            }
            for a in graph.arcs(s as StateId).iter().filter(|a| a.ilabel != 0) {
                let prob = p.row(t)[a.ilabel as usize - 1] as f64;
                if prob <= 0.0 {
                    continue;
                }
                let c = dist[s] + a.weight.value() - prob.ln();
                if c < next[a.nextstate as usize] {
                    next[a.nextstate as usize] = c;
                }
            }
        }
        relax_epsilons(&mut next);
        dist = next;
    }
    (0..n)
        .filter(|&s| !graph.final_weight(s as StateId).is_zero())
        .map(|s| dist[s] + graph.final_weight(s as StateId).value())
        .filter(|c| c.is_finite())
        .min_by(f64::total_cmp)
}

/// Rows drawn from a random softmax.
pub fn random_posteriors(rng: &mut ChaCha8Rng, frames: usize, vocab: usize) -> PosteriorMatrix {
    let mut values = Vec::with_capacity(frames * vocab);
    for _ in 0..frames {
        let logits: Vec<f64> = (0..vocab).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let z: f64 = logits.iter().map(|l| l.exp()).sum();
        values.extend(logits.iter().map(|l| (l.exp() / z) as f32));
    }
    PosteriorMatrix::new(frames, vocab, values).expect("stochastic rows")
}

/// Fixed-seed generator for tests.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
