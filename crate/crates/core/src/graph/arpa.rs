//! ARPA back-off n-gram language models.

use std::collections::HashMap;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ArpaError {
    #[error("no \\data\\ header found")]
    MissingDataHeader,
    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("line {line}: order {order} declares {declared} n-grams but {found} were listed")]
    CountMismatch { order: usize, declared: usize, found: usize, line: usize },
    #[error("line {line}: input ends without the \\end\\ terminator")]
    MissingEnd { line: usize },
    #[error("line {line}: context `{context}` of an order-{order} n-gram is not in the model")]
    MissingContext { line: usize, order: usize, context: String },
    #[error("line {line}: log10 probability {value} is positive")]
    PositiveProbability { line: usize, value: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct NGram {
    pub words: Vec<String>,
    pub log10_prob: f64,
    /// 0.0 when the file gives none.
    pub log10_backoff: f64,
}

/// Back-off n-gram model. N-grams keep file order so that anything built
/// from the model is deterministic.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NGramModel {
    orders: Vec<Vec<NGram>>,
    index: Vec<HashMap<Vec<String>, usize>>,
}

pub const SENTENCE_START: &str = "<s>";
pub const SENTENCE_END: &str = "</s>";

impl NGramModel {
    pub fn order(&self) -> usize {
        self.orders.len()
    }

    /// N-grams of order `n` (1-based).
    pub fn ngrams(&self, n: usize) -> &[NGram] {
        &self.orders[n - 1]
    }

    pub fn get(&self, words: &[String]) -> Option<&NGram> {
        let n = words.len();
        if n == 0 || n > self.order() {
            return None;
        }
        self.index[n - 1].get(words).map(|&i| &self.orders[n - 1][i])
    }

    pub fn contains_word(&self, word: &str) -> bool {
        self.order() > 0 && self.index[0].contains_key(&[word.to_owned()][..])
    }

    /// log10 p(word | context) with back-off. `None` when the word is not a
    /// unigram.
    pub fn log10_prob(&self, context: &[String], word: &str) -> Option<f64> {
        let keep = context.len().min(self.order().saturating_sub(1));
        let context = &context[context.len() - keep..];
        let mut words = context.to_vec();
        words.push(word.to_owned());
        if let Some(ng) = self.get(&words) {
            return Some(ng.log10_prob);
        }
        if context.is_empty() {
            return None;
        }
        let backoff = self.get(context).map_or(0.0, |ng| ng.log10_backoff);
        Some(backoff + self.log10_prob(&context[1..], word)?)
    }

    /// log10 probability of a whole sentence, including the end marker,
    /// starting from the `<s>` context.
    pub fn sentence_log10(&self, words: &[&str]) -> Option<f64> {
        let mut context = vec![SENTENCE_START.to_owned()];
        let mut total = 0.0;
        for &w in words.iter().chain(std::iter::once(&SENTENCE_END)) {
            total += self.log10_prob(&context, w)?;
            context.push(w.to_owned());
        }
        Some(total)
    }
}

fn malformed(line: usize, message: impl Into<String>) -> ArpaError {
    ArpaError::MalformedLine { line, message: message.into() }
}

pub fn parse_arpa(text: &str) -> Result<NGramModel, ArpaError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));

    // Anything before \data\ is free-form commentary.
    if !lines.by_ref().any(|(_, l)| l == "\\data\\") {
        return Err(ArpaError::MissingDataHeader);
    }

    let mut declared: Vec<usize> = Vec::new();
    let mut section: Option<(usize, usize)> = None; // (order, header line)
    for (line, l) in lines.by_ref() {
        if l.is_empty() {
            continue;
        }
        if let Some(rest) = l.strip_prefix("ngram ") {
            let (n, count) = rest.split_once('=').ok_or_else(|| malformed(line, "expected `ngram N=count`"))?;
            let n: usize = n.trim().parse().map_err(|_| malformed(line, "bad n-gram order"))?;
            let count: usize = count.trim().parse().map_err(|_| malformed(line, "bad n-gram count"))?;
            if n != declared.len() + 1 {
                return Err(malformed(line, format!("expected order {} next", declared.len() + 1)));
            }
            declared.push(count);
            continue;
        }
        section = Some((parse_section_header(l, line)?, line));
        break;
    }
    if declared.is_empty() {
        return Err(malformed(0, "no n-gram counts declared"));
    }

    let mut model = NGramModel {
        orders: vec![Vec::new(); declared.len()],
        index: vec![HashMap::new(); declared.len()],
    };
    let mut expected_order = 1;
    let mut ended = false;
    let mut last_line = 0;
    while let Some((order, header_line)) = section.take() {
        if order != expected_order || order > declared.len() {
            return Err(malformed(header_line, format!("unexpected section for order {order}")));
        }
        expected_order += 1;
        let mut next_header = None;
        for (line, l) in lines.by_ref() {
            last_line = line;
            if l.is_empty() {
                continue;
            }
            if l.starts_with('\\') {
                next_header = Some((line, l));
                break;
            }
            let ng = parse_ngram(l, line, order)?;
            if order > 1 {
                let context = &ng.words[..order - 1];
                if model.get(context).is_none() {
                    return Err(ArpaError::MissingContext { line, order, context: context.join(" ") });
                }
            }
            model.index[order - 1].insert(ng.words.clone(), model.orders[order - 1].len());
            model.orders[order - 1].push(ng);
        }
        let found = model.orders[order - 1].len();
        let end_line = next_header.map_or(last_line, |(l, _)| l);
        if found != declared[order - 1] {
            return Err(ArpaError::CountMismatch { order, declared: declared[order - 1], found, line: end_line });
        }
        match next_header {
            Some((_, "\\end\\")) => ended = true,
            Some((line, header)) => section = Some((parse_section_header(header, line)?, line)),
            None => {}
        }
    }
    if !ended {
        return Err(ArpaError::MissingEnd { line: text.lines().count() });
    }
    if expected_order != declared.len() + 1 {
        return Err(ArpaError::CountMismatch {
            order: expected_order,
            declared: declared[expected_order - 1],
            found: 0,
            line: last_line,
        });
    }
    Ok(model)
}

fn parse_section_header(l: &str, line: usize) -> Result<usize, ArpaError> {
    l.strip_prefix('\\')
        .and_then(|s| s.strip_suffix("-grams:"))
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| malformed(line, format!("expected `\\N-grams:`, found `{l}`")))
}

fn parse_ngram(l: &str, line: usize, order: usize) -> Result<NGram, ArpaError> {
    let fields: Vec<&str> = l.split_whitespace().collect();
    if fields.len() != order + 1 && fields.len() != order + 2 {
        return Err(malformed(line, format!("expected {} or {} fields for an order-{order} n-gram", order + 1, order + 2)));
    }
    let number = |s: &str| -> Result<f64, ArpaError> {
        let v: f64 = s.parse().map_err(|_| malformed(line, format!("bad number `{s}`")))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(malformed(line, format!("non-finite number `{s}`")))
        }
    };
    let log10_prob = number(fields[0])?;
    if log10_prob > 0.0 {
        return Err(ArpaError::PositiveProbability { line, value: log10_prob });
    }
    let log10_backoff = match fields.get(order + 1) {
        Some(b) => number(b)?,
        None => 0.0,
    };
    Ok(NGram { words: fields[1..=order].iter().map(|s| s.to_string()).collect(), log10_prob, log10_backoff })
}
