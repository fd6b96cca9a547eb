//! Decoding-graph construction: token (T), lexicon (L) and grammar (G)
//! machines and their combination into a single TLG transducer.
//!
//! Token ids follow a fixed layout: `<eps>` = 0, `<blk>` = 1, real tokens
//! from 2, then disambiguation symbols `#0`, `#1`, ... Graph input label `i`
//! reads posterior column `i - 1`.

mod arpa;
mod grammar;
mod lexicon;

pub use arpa::{parse_arpa, ArpaError, NGram, NGramModel, SENTENCE_END, SENTENCE_START};
pub use grammar::{build_grammar_fst, log10_to_cost};
pub use lexicon::{build_lexicon_fst, Lexicon, Pronunciation, EPSILON_SYMBOL};

use serde::Serialize;
use thiserror::Error;

use crate::wfst::{
    arcsort, compose, determinize, minimize, push_weights, relabel_input_to_epsilon, trim, Arc, ArcSortKey, Fst,
    FstError, Label, SymbolTable, EPSILON,
};

pub const BLANK_SYMBOL: &str = "<blk>";
pub const BLANK_LABEL: Label = 1;
pub const DISAMBIG_PREFIX: &str = "#";

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("token table: {0}")]
    TokenTable(String),
    #[error("lexicon line {line}: {message}")]
    Lexicon { line: usize, message: String },
    #[error("lexicon line {line}: unknown token `{token}`")]
    UnknownToken { line: usize, token: String },
    #[error("lexicon line {line}: word `{word}` has an empty pronunciation")]
    EmptyPronunciation { line: usize, word: String },
    #[error("words `{first}` and `{second}` share a pronunciation; enable disambiguation symbols")]
    Homophones { first: String, second: String },
    #[error("parse_arpa: {0}")]
    Arpa(#[from] ArpaError),
    #[error("{stage}: {source}")]
    Stage { stage: &'static str, source: FstError },
}

/// Token symbol table with the fixed id layout described at module level.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenTable {
    symbols: SymbolTable,
    real: u32,
    disambig: u32,
}

impl TokenTable {
    pub fn new<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Result<Self, GraphError> {
        let mut symbols = SymbolTable::new();
        symbols.add(EPSILON_SYMBOL);
        symbols.add(BLANK_SYMBOL);
        let mut real = 0;
        for t in tokens {
            if t.starts_with(DISAMBIG_PREFIX) || t == EPSILON_SYMBOL || t == BLANK_SYMBOL {
                return Err(GraphError::TokenTable(format!("reserved token name `{t}`")));
            }
            if symbols.id(t).is_some() {
                return Err(GraphError::TokenTable(format!("duplicate token `{t}`")));
            }
            symbols.add(t);
            real += 1;
        }
        if real == 0 {
            return Err(GraphError::TokenTable("no tokens besides blank".into()));
        }
        Ok(Self { symbols, real, disambig: 0 })
    }

    /// Validates a table read from disk against the fixed layout.
    pub fn from_symbols(symbols: SymbolTable) -> Result<Self, GraphError> {
        let bad = |m: String| Err(GraphError::TokenTable(m));
        if symbols.symbol(0) != Some(EPSILON_SYMBOL) || symbols.symbol(BLANK_LABEL) != Some(BLANK_SYMBOL) {
            return bad(format!("ids 0 and 1 must be `{EPSILON_SYMBOL}` and `{BLANK_SYMBOL}`"));
        }
        if symbols.bound() as usize != symbols.len() {
            return bad("ids must be contiguous".into());
        }
        let mut real = 0;
        let mut disambig = 0;
        for (id, sym) in symbols.iter().skip(2) {
            match sym.strip_prefix(DISAMBIG_PREFIX) {
                Some(n) => {
                    if n != disambig.to_string() {
                        return bad(format!("expected `#{disambig}` at id {id}"));
                    }
                    disambig += 1;
                }
                None if disambig > 0 => return bad(format!("token `{sym}` after disambiguation symbols")),
                None => real += 1,
            }
        }
        if real == 0 {
            return bad("no tokens besides blank".into());
        }
        Ok(Self { symbols, real, disambig })
    }

    pub fn symbols(&self) -> &SymbolTable {
        &self.symbols
    }

    /// Posterior columns: blank plus real tokens.
    pub fn vocab_size(&self) -> usize {
        self.real as usize + 1
    }

    pub fn real_token(&self, name: &str) -> Option<Label> {
        self.symbols.id(name).filter(|&id| id >= 2 && id < 2 + self.real)
    }

    pub fn name(&self, label: Label) -> Option<&str> {
        self.symbols.symbol(label)
    }

    /// Graph label reading posterior column `column`.
    pub fn label_for_column(column: usize) -> Label {
        column as Label + 1
    }

    pub fn column_for_label(label: Label) -> usize {
        label as usize - 1
    }

    pub fn is_disambig(&self, label: Label) -> bool {
        label >= 2 + self.real && label < 2 + self.real + self.disambig
    }

    /// Id of `#n`; `ensure_disambig(n)` must have been called.
    pub fn disambig(&self, n: u32) -> Label {
        assert!(n < self.disambig, "#{n} not in token table");
        2 + self.real + n
    }

    /// Adds `#0` through `#max` if missing.
    pub fn ensure_disambig(&mut self, max: u32) {
        while self.disambig <= max {
            self.symbols.add(&format!("{DISAMBIG_PREFIX}{}", self.disambig));
            self.disambig += 1;
        }
    }
}

/// CTC token transducer: reads frame-level token strings (blank included)
/// and writes their collapse. State 0 is the between-tokens state; state
/// `k - 1` follows token `k`. Every state is final.
pub fn build_token_fst(tokens: &TokenTable) -> Fst {
    let real: Vec<Label> = (2..2 + tokens.real).collect();
    let state_of = |k: Label| k - 1;
    let mut f = Fst::new();
    f.add_states(real.len() + 1);
    f.set_start(0).expect("state 0 exists");
    let mut add = |s, arc| f.add_arc(s, arc).expect("states exist");
    add(0, Arc::new(BLANK_LABEL, EPSILON, 0.0, 0));
    for &k in &real {
        add(0, Arc::new(k, k, 0.0, state_of(k)));
        add(state_of(k), Arc::new(BLANK_LABEL, EPSILON, 0.0, 0));
        for &j in &real {
            let arc = if j == k { Arc::new(k, EPSILON, 0.0, state_of(k)) } else { Arc::new(j, j, 0.0, state_of(j)) };
            add(state_of(k), arc);
        }
    }
    for s in f.states().collect::<Vec<_>>() {
        f.set_final(s, 0.0).expect("state exists");
    }
    f.set_input_symbols(Some(tokens.symbols.clone()));
    f.set_output_symbols(Some(tokens.symbols.clone()));
    f
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StageStats {
    pub stage: &'static str,
    pub states: usize,
    pub arcs: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BuildManifest {
    pub use_pushing: bool,
    pub stages: Vec<StageStats>,
}

fn stage<T>(name: &'static str, r: Result<T, FstError>) -> Result<T, GraphError> {
    r.map_err(|source| GraphError::Stage { stage: name, source })
}

/// `T ∘ min(det(L ∘ G))`, or with `use_pushing`, `T ∘ min(push(det(L ∘ G)))`.
///
/// Disambiguation symbols (any `#n` in L's input table) are rewritten to
/// epsilon after minimization. The result is trimmed and ilabel-sorted.
pub fn build_tlg(t: &Fst, l: &Fst, g: &Fst, use_pushing: bool) -> Result<(Fst, BuildManifest), GraphError> {
    let mut stages = Vec::new();
    let mut record = |name: &'static str, f: &Fst| stages.push(StageStats { stage: name, states: f.num_states(), arcs: f.num_arcs() });

    let lg = stage("compose(L, G)", compose(l, g))?;
    record("compose(L, G)", &lg);
    let mut lg = stage("determinize", determinize(&lg))?;
    record("determinize", &lg);
    if use_pushing {
        lg = stage("push_weights", push_weights(&trim(&lg)))?;
        record("push_weights", &lg);
    }
    let lg = stage("minimize", minimize(&lg))?;
    record("minimize", &lg);

    let disambig: Vec<Label> = lg
        .input_symbols()
        .map(|syms| syms.iter().filter(|(_, s)| s.starts_with(DISAMBIG_PREFIX)).map(|(id, _)| id).collect())
        .unwrap_or_default();
    let lg = relabel_input_to_epsilon(&lg, &|l| disambig.contains(&l));

    let tlg = stage("compose(T, LG)", compose(t, &lg))?;
    let tlg = arcsort(&trim(&tlg), ArcSortKey::ILabel);
    record("compose(T, LG)", &tlg);
    Ok((tlg, BuildManifest { use_pushing, stages }))
}

/// A ready-to-decode graph with its symbol tables.
#[derive(Clone, Debug)]
pub struct DecodingGraph {
    pub fst: Fst,
    pub tokens: TokenTable,
    pub words: SymbolTable,
    pub manifest: BuildManifest,
}

impl DecodingGraph {
    /// Builds from lexicon and ARPA text. Without `tokens`, the token table
    /// is inferred from the lexicon in first-appearance order.
    pub fn build(
        lexicon_text: &str,
        arpa_text: &str,
        tokens: Option<&TokenTable>,
        use_pushing: bool,
    ) -> Result<Self, GraphError> {
        let lex = match tokens {
            Some(t) => Lexicon::parse(lexicon_text, t)?,
            None => Lexicon::parse_with_inferred_tokens(lexicon_text)?,
        };
        let model = parse_arpa(arpa_text)?;
        let (l, tokens) = build_lexicon_fst(&lex, true)?;
        let words = l.output_symbols().expect("lexicon machine has word table").clone();
        let g = build_grammar_fst(&model, &words);
        let t = build_token_fst(&tokens);
        let (fst, manifest) = build_tlg(&t, &l, &g, use_pushing)?;
        Ok(Self { fst, tokens, words, manifest })
    }

    pub fn word_strings(&self, words: &[Label]) -> Vec<String> {
        words.iter().map(|&w| self.words.symbol(w).unwrap_or("<unk>").to_owned()).collect()
    }
}
