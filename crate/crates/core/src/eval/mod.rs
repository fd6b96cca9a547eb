//! Edit-distance scoring and the compression benchmark.

mod bench;

pub use bench::{bench, bench_report_csv, bench_report_json, mode_label, sweep_csv, BenchReport, BenchRow, BenchUtterance};

use std::collections::HashSet;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("transcript line {line}: expected `utt_id<TAB>text`")]
    Transcript { line: usize },
    #[error("transcript line {line}: duplicate utterance id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("utterance `{id}` is missing from the {side}")]
    IdMismatch { id: String, side: &'static str },
    #[error("benchmark modes must include dense")]
    MissingDense,
    #[error("benchmark needs at least one repeat")]
    NoRepeats,
    #[error(transparent)]
    Compress(#[from] crate::compress::CompressError),
    #[error("report serialization: {0}")]
    Report(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct EditCounts {
    pub distance: usize,
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
}

/// Unit-cost edit distance from `reference` to `hypothesis`, with the edit
/// breakdown of one optimal alignment (matches and substitutions preferred
/// over deletions, deletions over insertions).
pub fn levenshtein<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> EditCounts {
    let (n, m) = (reference.len(), hypothesis.len());
    let width = m + 1;
    let mut d = vec![0usize; (n + 1) * width];
    for j in 0..=m {
        d[j] = j;
    }
    for i in 1..=n {
        d[i * width] = i;
        for j in 1..=m {
            let sub = d[(i - 1) * width + j - 1] + usize::from(reference[i - 1] != hypothesis[j - 1]);
            let del = d[(i - 1) * width + j] + 1;
            let ins = d[i * width + j - 1] + 1;
            d[i * width + j] = sub.min(del).min(ins);
        }
    }
    let mut counts = EditCounts { distance: d[n * width + m], ..Default::default() };
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * width + j];
        if i > 0 && j > 0 {
            let differs = reference[i - 1] != hypothesis[j - 1];
            if d[(i - 1) * width + j - 1] + usize::from(differs) == here {
                counts.substitutions += usize::from(differs);
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && d[(i - 1) * width + j] + 1 == here {
            counts.deletions += 1;
            i -= 1;
        } else {
            counts.insertions += 1;
            j -= 1;
        }
    }
    counts
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    /// Non-whitespace characters.
    Char,
    /// Whitespace-separated words.
    Word,
}

pub fn units(text: &str, unit: Unit) -> Vec<&str> {
    match unit {
        Unit::Char => text
            .char_indices()
            .filter(|(_, c)| !c.is_whitespace())
            .map(|(i, c)| &text[i..i + c.len_utf8()])
            .collect(),
        Unit::Word => text.split_whitespace().collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UtteranceScore {
    pub id: String,
    pub edits: EditCounts,
    pub reference_len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScoreReport {
    pub unit: Unit,
    pub utterances: Vec<UtteranceScore>,
    pub total_edits: usize,
    pub total_reference_len: usize,
    /// Pooled rate: total edits over total reference length, as a fraction.
    pub rate: f64,
}

impl ScoreReport {
    fn from_utterances(unit: Unit, utterances: Vec<UtteranceScore>) -> Self {
        let total_edits = utterances.iter().map(|u| u.edits.distance).sum();
        let total_reference_len = utterances.iter().map(|u| u.reference_len).sum();
        let rate = match (total_edits, total_reference_len) {
            (0, _) => 0.0,
            (_, 0) => f64::INFINITY,
            (e, r) => e as f64 / r as f64,
        };
        Self { unit, utterances, total_edits, total_reference_len, rate }
    }

    pub fn percent(&self) -> f64 {
        self.rate * 100.0
    }
}

/// Scores aligned (reference, hypothesis) pairs; ids are their positions.
pub fn score_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>, unit: Unit) -> ScoreReport {
    let utterances = pairs
        .into_iter()
        .enumerate()
        .map(|(i, (r, h))| {
            let (r, h) = (units(r, unit), units(h, unit));
            UtteranceScore { id: i.to_string(), edits: levenshtein(&r, &h), reference_len: r.len() }
        })
        .collect();
    ScoreReport::from_utterances(unit, utterances)
}

/// `(id, text)` pairs in file order.
pub type Transcript = Vec<(String, String)>;

/// Parses `utt_id<TAB>text` lines. The text may be empty.
pub fn parse_transcript(text: &str) -> Result<Transcript, EvalError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let (id, body) = match raw.split_once('\t') {
            Some((id, body)) => (id.trim(), body.trim()),
            None => (raw.trim(), ""),
        };
        if id.is_empty() || id.contains(char::is_whitespace) {
            return Err(EvalError::Transcript { line });
        }
        if !seen.insert(id.to_owned()) {
            return Err(EvalError::DuplicateId { line, id: id.to_owned() });
        }
        out.push((id.to_owned(), body.to_owned()));
    }
    Ok(out)
}

pub fn format_transcript(entries: &[(String, String)]) -> String {
    entries.iter().map(|(id, text)| format!("{id}\t{text}\n")).collect()
}

/// Scores hypotheses against references matched by utterance id, in
/// reference order.
pub fn score_corpus(refs: &[(String, String)], hyps: &[(String, String)], unit: Unit) -> Result<ScoreReport, EvalError> {
    let by_id: std::collections::HashMap<&str, &str> = hyps.iter().map(|(i, t)| (i.as_str(), t.as_str())).collect();
    if let Some((id, _)) = hyps.iter().find(|(id, _)| !refs.iter().any(|(r, _)| r == id)) {
        return Err(EvalError::IdMismatch { id: id.clone(), side: "references" });
    }
    let utterances = refs
        .iter()
        .map(|(id, r)| {
            let h = by_id.get(id.as_str()).ok_or_else(|| EvalError::IdMismatch { id: id.clone(), side: "hypotheses" })?;
            let (r, h) = (units(r, unit), units(h, unit));
            Ok(UtteranceScore { id: id.clone(), edits: levenshtein(&r, &h), reference_len: r.len() })
        })
        .collect::<Result<_, EvalError>>()?;
    Ok(ScoreReport::from_utterances(unit, utterances))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chars(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    #[test]
    fn basic_distances() {
        assert_eq!(levenshtein(&chars("abc"), &chars("abc")).distance, 0);
        let e = levenshtein(&chars("abc"), &chars(""));
        assert_eq!((e.distance, e.deletions), (3, 3));
        let e = levenshtein(&chars(""), &chars("ab"));
        assert_eq!((e.distance, e.insertions), (2, 2));
        let e = levenshtein(&chars("kitten"), &chars("sitting"));
        assert_eq!(e.distance, 3);
        assert_eq!(e.substitutions + e.insertions + e.deletions, 3);
    }

    proptest::proptest! {
        #[test]
        fn metric_properties(a in "[abc]{0,7}", b in "[abc]{0,7}", c in "[abc]{0,7}") {
            let (a, b, c) = (chars(&a), chars(&b), chars(&c));
            let ab = levenshtein(&a, &b);
            proptest::prop_assert_eq!(ab.distance, levenshtein(&b, &a).distance);
            proptest::prop_assert!(ab.distance <= levenshtein(&a, &c).distance + levenshtein(&c, &b).distance);
            proptest::prop_assert_eq!(ab.substitutions + ab.insertions + ab.deletions, ab.distance);
            proptest::prop_assert!(ab.distance <= a.len().max(b.len()));
            // Length difference is accounted for exactly.
            proptest::prop_assert_eq!(a.len() + ab.insertions, b.len() + ab.deletions);
        }
    }

    #[test]
    fn unit_splitting() {
        assert_eq!(units("ab c", Unit::Char), vec!["a", "b", "c"]);
        assert_eq!(units(" ab  c ", Unit::Word), vec!["ab", "c"]);
        assert_eq!(units("né", Unit::Char), vec!["n", "é"]);
    }

    fn t(pairs: &[(&str, &str)]) -> Transcript {
        pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
    }

    #[test]
    fn corpus_rate_is_pooled() {
        let refs = t(&[("u1", "abcd"), ("u2", "ab")]);
        let hyps = t(&[("u2", "xb"), ("u1", "abcd")]);
        let r = score_corpus(&refs, &hyps, Unit::Char).unwrap();
        assert_eq!(r.total_edits, 1);
        assert_eq!(r.total_reference_len, 6);
        assert!((r.rate - 1.0 / 6.0).abs() < 1e-12);
        assert_eq!(r.utterances[0].id, "u1");
    }

    #[test]
    fn one_error_in_hundred() {
        let reference = "a".repeat(100);
        let hypothesis = format!("{}b", "a".repeat(99));
        let r = score_pairs([(reference.as_str(), hypothesis.as_str())], Unit::Char);
        assert!((r.percent() - 1.0).abs() < 1e-12);
        assert_eq!(score_pairs([("abc", "abc")], Unit::Char).rate, 0.0);
    }

    #[test]
    fn id_mismatch() {
        let refs = t(&[("u1", "a")]);
        assert_eq!(
            score_corpus(&refs, &t(&[("u2", "a")]), Unit::Char),
            Err(EvalError::IdMismatch { id: "u2".into(), side: "references" })
        );
        assert_eq!(
            score_corpus(&refs, &[], Unit::Char),
            Err(EvalError::IdMismatch { id: "u1".into(), side: "hypotheses" })
        );
    }

    #[test]
    fn transcript_format() {
        let parsed = parse_transcript("u1\thello world\nu2\t\n\nu3\n").unwrap();
        assert_eq!(parsed, t(&[("u1", "hello world"), ("u2", ""), ("u3", "")]));
        assert_eq!(parse_transcript(&format_transcript(&parsed)).unwrap(), parsed);
        assert_eq!(
            parse_transcript("u1\ta\nu1\tb\n"),
            Err(EvalError::DuplicateId { line: 2, id: "u1".into() })
        );
        assert_eq!(parse_transcript("bad id\tx\n"), Err(EvalError::Transcript { line: 1 }));
    }
}
