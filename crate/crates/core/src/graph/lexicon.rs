use std::collections::{HashMap, HashSet};

use super::{GraphError, TokenTable, DISAMBIG_PREFIX};
use crate::wfst::{Arc, Fst, Label, SymbolTable, EPSILON};

pub const EPSILON_SYMBOL: &str = "<eps>";

#[derive(Clone, Debug, PartialEq)]
pub struct Pronunciation {
    pub word: Label,
    pub tokens: Vec<Label>,
}

/// Word pronunciations over a token table. A word may have several
/// pronunciations; each is one entry.
#[derive(Clone, Debug)]
pub struct Lexicon {
    pub entries: Vec<Pronunciation>,
    pub tokens: TokenTable,
    /// `<eps>` = 0, then words in first-appearance order.
    pub words: SymbolTable,
}

impl Lexicon {
    /// Parses `word<TAB>tok tok ...` lines. Tokens must exist in `tokens`.
    pub fn parse(text: &str, tokens: &TokenTable) -> Result<Self, GraphError> {
        let mut words = SymbolTable::new();
        words.add(EPSILON_SYMBOL);
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let mut fields = raw.split_whitespace();
            let Some(word) = fields.next() else { continue };
            if word.starts_with(DISAMBIG_PREFIX) || word == EPSILON_SYMBOL {
                return Err(GraphError::Lexicon { line, message: format!("reserved word `{word}`") });
            }
            let toks = fields
                .map(|t| tokens.real_token(t).ok_or_else(|| GraphError::UnknownToken { line, token: t.to_owned() }))
                .collect::<Result<Vec<_>, _>>()?;
            if toks.is_empty() {
                return Err(GraphError::EmptyPronunciation { line, word: word.to_owned() });
            }
            entries.push(Pronunciation { word: words.add(word), tokens: toks });
        }
        Ok(Self { entries, tokens: tokens.clone(), words })
    }

    /// Builds a lexicon whose token table is the lexicon's own tokens in
    /// first-appearance order.
    pub fn parse_with_inferred_tokens(text: &str) -> Result<Self, GraphError> {
        let mut names = Vec::new();
        for raw in text.lines() {
            for t in raw.split_whitespace().skip(1) {
                if !names.iter().any(|n: &String| n == t) {
                    names.push(t.to_owned());
                }
            }
        }
        let tokens = TokenTable::new(names.iter().map(String::as_str))?;
        Self::parse(text, &tokens)
    }

    pub fn word_symbol(&self, word: Label) -> &str {
        self.words.symbol(word).expect("lexicon word ids are dense")
    }

    /// Disambiguation suffix for each entry (0 = none). Entries whose token
    /// string is shared with another entry or is a proper prefix of another
    /// entry's get a distinct `#n`, n ≥ 1, per token string.
    fn disambig_suffixes(&self) -> Vec<u32> {
        let mut count: HashMap<&[Label], usize> = HashMap::new();
        let mut prefixes: HashSet<&[Label]> = HashSet::new();
        for e in &self.entries {
            *count.entry(&e.tokens).or_default() += 1;
            for k in 1..e.tokens.len() {
                prefixes.insert(&e.tokens[..k]);
            }
        }
        let mut next: HashMap<&[Label], u32> = HashMap::new();
        self.entries
            .iter()
            .map(|e| {
                let t: &[Label] = &e.tokens;
                if count[t] > 1 || prefixes.contains(t) {
                    let n = next.entry(t).or_insert(0);
                    *n += 1;
                    *n
                } else {
                    0
                }
            })
            .collect()
    }

    fn check_homophones(&self) -> Result<(), GraphError> {
        let mut seen: HashMap<&[Label], Label> = HashMap::new();
        for e in &self.entries {
            if let Some(&other) = seen.get(&e.tokens[..]) {
                if other != e.word {
                    return Err(GraphError::Homophones {
                        first: self.word_symbol(other).to_owned(),
                        second: self.word_symbol(e.word).to_owned(),
                    });
                }
            }
            seen.insert(&e.tokens, e.word);
        }
        Ok(())
    }

    /// Word table used by the grammar: lexicon words plus `#0`.
    pub fn grammar_words(&self) -> SymbolTable {
        let mut words = self.words.clone();
        words.add(&format!("{DISAMBIG_PREFIX}0"));
        words
    }
}

/// Transducer from token strings to word strings. State 0 is both start and
/// final; each pronunciation is a loop through it emitting the word on its
/// first arc.
///
/// With `add_disambig`, ambiguous pronunciations get a trailing `#n` and a
/// `#0:#0` self-loop passes grammar back-off symbols through. The token
/// table gains the needed `#n` symbols.
pub fn build_lexicon_fst(lex: &Lexicon, add_disambig: bool) -> Result<(Fst, TokenTable), GraphError> {
    let mut tokens = lex.tokens.clone();
    let words = lex.grammar_words();
    let suffixes = if add_disambig {
        let s = lex.disambig_suffixes();
        tokens.ensure_disambig(s.iter().copied().max().unwrap_or(0));
        s
    } else {
        lex.check_homophones()?;
        vec![0; lex.entries.len()]
    };

    let mut f = Fst::new();
    let root = f.add_state();
    f.set_start(root).expect("root exists");
    f.set_final(root, 0.0).expect("root exists");
    for (entry, &suffix) in lex.entries.iter().zip(&suffixes) {
        let mut labels = entry.tokens.clone();
        if suffix > 0 {
            labels.push(tokens.disambig(suffix));
        }
        let mut src = root;
        for (i, &tok) in labels.iter().enumerate() {
            let dst = if i + 1 == labels.len() { root } else { f.add_state() };
            let olabel = if i == 0 { entry.word } else { EPSILON };
            f.add_arc(src, Arc::new(tok, olabel, 0.0, dst)).expect("states exist");
            src = dst;
        }
    }
    if add_disambig {
        let word0 = words.id(&format!("{DISAMBIG_PREFIX}0")).expect("grammar words include #0");
        f.add_arc(root, Arc::new(tokens.disambig(0), word0, 0.0, root)).expect("root exists");
    }
    f.set_input_symbols(Some(tokens.symbols().clone()));
    f.set_output_symbols(Some(words));
    Ok((f, tokens))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wfst::{compose, determinize, linear_fst, shortest_path};

    fn lexicon(text: &str) -> Lexicon {
        Lexicon::parse_with_inferred_tokens(text).unwrap()
    }

    fn transduce(l: &Fst, toks: &[Label]) -> Option<Vec<Label>> {
        let input = linear_fst(toks, toks, 0.0);
        let mut input = input;
        input.set_output_symbols(l.input_symbols().cloned());
        shortest_path(&compose(&input, l).ok()?).ok().map(|p| p.olabels)
    }

    #[test]
    fn single_entry() {
        let lex = lexicon("ab\ta b\n");
        let (l, tokens) = build_lexicon_fst(&lex, false).unwrap();
        let ids = [tokens.real_token("a").unwrap(), tokens.real_token("b").unwrap()];
        assert_eq!(transduce(&l, &ids), Some(vec![lex.words.id("ab").unwrap()]));
        assert_eq!(transduce(&l, &ids[..1]), None);
    }

    #[test]
    fn homophones_need_disambig() {
        let lex = lexicon("red\tr e d\nread\tr e d\n");
        assert_eq!(
            build_lexicon_fst(&lex, false).err(),
            Some(GraphError::Homophones { first: "red".into(), second: "read".into() })
        );
        let (l, tokens) = build_lexicon_fst(&lex, true).unwrap();
        assert!(tokens.symbols().id("#1").is_some() && tokens.symbols().id("#2").is_some());
        let toks: Vec<Label> = ["r", "e", "d"].iter().map(|t| tokens.real_token(t).unwrap()).collect();
        let mut a = toks.clone();
        a.push(tokens.disambig(1));
        let mut b = toks;
        b.push(tokens.disambig(2));
        assert_eq!(transduce(&l, &a), Some(vec![lex.words.id("red").unwrap()]));
        assert_eq!(transduce(&l, &b), Some(vec![lex.words.id("read").unwrap()]));
        assert!(determinize(&l).is_ok());
    }

    #[test]
    fn prefix_gets_disambig() {
        let lex = lexicon("a\ta\nab\ta b\n");
        assert_eq!(lex.disambig_suffixes(), vec![1, 0]);
        let (l, tokens) = build_lexicon_fst(&lex, true).unwrap();
        // Arc from root on `a` for word "a" goes to an intermediate state,
        // whose only arc is #1 back to root.
        let a = tokens.real_token("a").unwrap();
        let word_a = lex.words.id("a").unwrap();
        let arc = l.arcs(0).iter().find(|x| x.ilabel == a && x.olabel == word_a).unwrap();
        assert_eq!(l.arcs(arc.nextstate), &[Arc::new(tokens.disambig(1), EPSILON, 0.0, 0)]);
    }

    #[test]
    fn parse_errors() {
        let tokens = TokenTable::new(["a", "b"]).unwrap();
        assert_eq!(
            Lexicon::parse("w\ta c\n", &tokens).err(),
            Some(GraphError::UnknownToken { line: 1, token: "c".into() })
        );
        assert_eq!(
            Lexicon::parse("w\ta\nv\n", &tokens).err(),
            Some(GraphError::EmptyPronunciation { line: 2, word: "v".into() })
        );
        assert!(matches!(Lexicon::parse("#3\ta\n", &tokens), Err(GraphError::Lexicon { line: 1, .. })));
        assert!(matches!(Lexicon::parse("w\t<blk>\n", &tokens), Err(GraphError::UnknownToken { .. })));
    }

    #[test]
    fn repeated_pronunciation_of_same_word_is_fine() {
        let lex = lexicon("a\tx\na\tx\n");
        assert!(build_lexicon_fst(&lex, false).is_ok());
    }
}
