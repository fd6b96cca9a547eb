//! AT&T text format: `src dst ilabel olabel [weight]` for arcs and
//! `state [weight]` for final states. The source of the first line is the
//! start state. Omitted weights are 0; `Infinity` is accepted.

use std::fmt::Write as _;

use thiserror::Error;

use super::{Arc, Fst, Label, StateId, SymbolTable, TropicalWeight};

#[derive(Debug, Error, PartialEq)]
pub enum AttError {
    #[error("line {line}: expected 1, 2, 4 or 5 fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: bad state id `{value}`")]
    BadState { line: usize, value: String },
    #[error("line {line}: state id {id} is far beyond the number of lines; ids must be dense")]
    SparseState { line: usize, id: u64 },
    #[error("line {line}: unknown label `{value}`")]
    BadLabel { line: usize, value: String },
    #[error("line {line}: bad weight `{value}`")]
    BadWeight { line: usize, value: String },
}

fn parse_state(field: &str, line: usize, limit: u64) -> Result<StateId, AttError> {
    let id: u64 = field.parse().map_err(|_| AttError::BadState { line, value: field.to_owned() })?;
    if id > limit {
        return Err(AttError::SparseState { line, id });
    }
    Ok(id as StateId)
}

fn parse_label(field: &str, line: usize, table: Option<&SymbolTable>) -> Result<Label, AttError> {
    let bad = || AttError::BadLabel { line, value: field.to_owned() };
    match table {
        Some(t) => t.id(field).ok_or_else(bad),
        None => field.parse().map_err(|_| bad()),
    }
}

fn parse_weight(field: Option<&str>, line: usize) -> Result<TropicalWeight, AttError> {
    let Some(field) = field else { return Ok(TropicalWeight::ONE) };
    let bad = || AttError::BadWeight { line, value: field.to_owned() };
    let v: f64 = match field {
        "Infinity" | "inf" => f64::INFINITY,
        _ => field.parse().map_err(|_| bad())?,
    };
    // -inf would make every path through the arc free, which the semiring
    // cannot represent.
    if v.is_nan() || v == f64::NEG_INFINITY {
        return Err(bad());
    }
    Ok(TropicalWeight::new(v))
}

/// Parses AT&T text. When symbol tables are given, labels are symbols and are
/// looked up; otherwise they must be integers. The tables are attached to the
/// result.
pub fn parse_att(text: &str, isyms: Option<&SymbolTable>, osyms: Option<&SymbolTable>) -> Result<Fst, AttError> {
    let limit = 4 * text.lines().count() as u64 + 1024;
    let mut fst = Fst::new();
    let ensure = |fst: &mut Fst, s: StateId| {
        if fst.num_states() <= s as usize {
            fst.add_states(s as usize + 1 - fst.num_states());
        }
    };
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        match fields.len() {
            1 | 2 => {
                let s = parse_state(fields[0], line, limit)?;
                let w = parse_weight(fields.get(1).copied(), line)?;
                ensure(&mut fst, s);
                if fst.start().is_none() {
                    fst.set_start(s).expect("state exists");
                }
                fst.set_final(s, w).expect("state exists");
            }
            4 | 5 => {
                let src = parse_state(fields[0], line, limit)?;
                let dst = parse_state(fields[1], line, limit)?;
                let il = parse_label(fields[2], line, isyms)?;
                let ol = parse_label(fields[3], line, osyms)?;
                let w = parse_weight(fields.get(4).copied(), line)?;
                ensure(&mut fst, src.max(dst));
                if fst.start().is_none() {
                    fst.set_start(src).expect("state exists");
                }
                fst.add_arc(src, Arc { ilabel: il, olabel: ol, weight: w, nextstate: dst }).expect("states exist");
            }
            found => return Err(AttError::FieldCount { line, found }),
        }
    }
    fst.set_input_symbols(isyms.cloned());
    fst.set_output_symbols(osyms.cloned());
    Ok(fst)
}

fn label_text(label: Label, table: Option<&SymbolTable>) -> String {
    match table.and_then(|t| t.symbol(label)) {
        Some(s) => s.to_owned(),
        None => label.to_string(),
    }
}

/// Writes AT&T text, start state's arcs first. With `symbolic`, labels are
/// written through the attached tables (falling back to integers).
pub fn write_att(fst: &Fst, symbolic: bool) -> String {
    let (isyms, osyms) = if symbolic { (fst.input_symbols(), fst.output_symbols()) } else { (None, None) };
    let mut out = String::new();
    let Some(start) = fst.start() else { return out };
    let order = std::iter::once(start).chain(fst.states().filter(|&s| s != start));
    let mut finals = Vec::new();
    for s in order {
        for a in fst.arcs(s) {
            let _ = write!(out, "{s}\t{}\t{}\t{}", a.nextstate, label_text(a.ilabel, isyms), label_text(a.olabel, osyms));
            if a.weight != TropicalWeight::ONE {
                let _ = write!(out, "\t{}", a.weight);
            }
            out.push('\n');
        }
        if fst.is_final(s) {
            finals.push(s);
        }
    }
    // A start state without arcs must still appear first.
    if fst.arcs(start).is_empty() {
        if let Some(pos) = finals.iter().position(|&s| s == start) {
            finals.remove(pos);
            out.insert_str(0, &final_line(fst, start));
        } else {
            // Neither final nor any arcs; record the start with a zero final weight.
            out.insert_str(0, &format!("{start}\tInfinity\n"));
        }
    }
    for s in finals {
        out.push_str(&final_line(fst, s));
    }
    out
}

fn final_line(fst: &Fst, s: StateId) -> String {
    let w = fst.final_weight(s);
    if w == TropicalWeight::ONE {
        format!("{s}\n")
    } else {
        format!("{s}\t{w}\n")
    }
}
