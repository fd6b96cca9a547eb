use std::collections::HashMap;
use std::f64::consts::LN_10;

use super::arpa::{NGramModel, SENTENCE_END, SENTENCE_START};
use super::DISAMBIG_PREFIX;
use crate::wfst::{trim, Arc, Fst, StateId, SymbolTable, EPSILON};

/// Negative natural-log cost of a log10 probability.
pub fn log10_to_cost(log10: f64) -> f64 {
    -LN_10 * log10
}

/// Grammar acceptor over `words`. States are n-gram histories; back-off arcs
/// carry `#0` on the input side and epsilon on the output side. N-grams
/// mentioning words outside `words` are skipped.
pub fn build_grammar_fst(model: &NGramModel, words: &SymbolTable) -> Fst {
    let backoff_label = words.id(&format!("{DISAMBIG_PREFIX}0")).expect("word table has #0");
    let known = |w: &str| w == SENTENCE_START || w == SENTENCE_END || words.id(w).is_some();

    let mut f = Fst::new();
    let mut states: HashMap<Vec<String>, StateId> = HashMap::new();
    let mut histories: Vec<Vec<String>> = Vec::new();
    let empty = f.add_state();
    states.insert(Vec::new(), empty);
    histories.push(Vec::new());
    for n in 1..model.order() {
        for ng in model.ngrams(n) {
            let is_history = ng.words.iter().all(|w| known(w)) && ng.words.last().map(String::as_str) != Some(SENTENCE_END);
            if is_history && !states.contains_key(&ng.words) {
                states.insert(ng.words.clone(), f.add_state());
                histories.push(ng.words.clone());
            }
        }
    }
    // Longest suffix of `h` that is a state.
    let state_for = |h: &[String]| -> StateId {
        let keep = h.len().min(model.order().saturating_sub(1));
        let mut h = &h[h.len() - keep..];
        loop {
            if let Some(&s) = states.get(h) {
                return s;
            }
            h = &h[1..];
        }
    };

    for n in 1..=model.order() {
        for ng in model.ngrams(n) {
            if !ng.words.iter().all(|w| known(w)) {
                continue;
            }
            let (history, word) = ng.words.split_at(n - 1);
            let Some(&src) = states.get(history) else { continue };
            let word = word[0].as_str();
            let cost = log10_to_cost(ng.log10_prob);
            if word == SENTENCE_END {
                f.set_final(src, cost).expect("state exists");
            } else if word != SENTENCE_START {
                let label = words.id(word).expect("known word");
                let dst = state_for(&ng.words);
                f.add_arc(src, Arc::new(label, label, cost, dst)).expect("states exist");
            }
        }
    }
    // States were created in history order.
    for (s, h) in histories.iter().enumerate() {
        let s = s as StateId;
        if h.is_empty() {
            continue;
        }
        let backoff = model.get(h).map_or(0.0, |ng| ng.log10_backoff);
        let dst = state_for(&h[1..]);
        f.add_arc(s, Arc::new(backoff_label, EPSILON, log10_to_cost(backoff), dst)).expect("states exist");
    }
    let start = states.get(&[SENTENCE_START.to_owned()][..]).copied().unwrap_or(empty);
    f.set_start(start).expect("state exists");
    f.set_input_symbols(Some(words.clone()));
    f.set_output_symbols(Some(words.clone()));
    trim(&f)
}
