use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::Label;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SymbolTableError {
    #[error("line {line}: expected `symbol<TAB>id`")]
    Malformed { line: usize },
    #[error("line {line}: bad id `{value}`")]
    BadId { line: usize, value: String },
    #[error("line {line}: symbol `{symbol}` defined twice")]
    DuplicateSymbol { line: usize, symbol: String },
    #[error("line {line}: id {id} assigned twice")]
    DuplicateId { line: usize, id: Label },
}

/// Bidirectional map between string symbols and integer labels.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SymbolTable {
    by_id: Vec<Option<String>>,
    by_symbol: HashMap<String, Label>,
}

impl SymbolTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `symbol` with the next free id, or returns its existing id.
    pub fn add(&mut self, symbol: &str) -> Label {
        if let Some(&id) = self.by_symbol.get(symbol) {
            return id;
        }
        let id = self.by_id.len() as Label;
        self.by_id.push(Some(symbol.to_owned()));
        self.by_symbol.insert(symbol.to_owned(), id);
        id
    }

    fn insert(&mut self, symbol: &str, id: Label) {
        let idx = id as usize;
        if self.by_id.len() <= idx {
            self.by_id.resize(idx + 1, None);
        }
        self.by_id[idx] = Some(symbol.to_owned());
        self.by_symbol.insert(symbol.to_owned(), id);
    }

    pub fn id(&self, symbol: &str) -> Option<Label> {
        self.by_symbol.get(symbol).copied()
    }

    pub fn symbol(&self, id: Label) -> Option<&str> {
        self.by_id.get(id as usize).and_then(|s| s.as_deref())
    }

    pub fn len(&self) -> usize {
        self.by_symbol.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_symbol.is_empty()
    }

    /// One past the largest id.
    pub fn bound(&self) -> Label {
        self.by_id.len() as Label
    }

    /// `(id, symbol)` pairs in id order.
    pub fn iter(&self) -> impl Iterator<Item = (Label, &str)> {
        self.by_id.iter().enumerate().filter_map(|(i, s)| s.as_deref().map(|s| (i as Label, s)))
    }

    /// Parses `symbol<TAB>id` lines (any whitespace separator is accepted).
    pub fn parse(text: &str) -> Result<Self, SymbolTableError> {
        let mut table = Self::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let mut fields = raw.split_whitespace();
            let (Some(symbol), Some(id), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(SymbolTableError::Malformed { line });
            };
            let id: Label = id.parse().map_err(|_| SymbolTableError::BadId { line, value: id.to_owned() })?;
            if table.by_symbol.contains_key(symbol) {
                return Err(SymbolTableError::DuplicateSymbol { line, symbol: symbol.to_owned() });
            }
            if table.symbol(id).is_some() {
                return Err(SymbolTableError::DuplicateId { line, id });
            }
            // Reject ids so sparse they would blow up the dense index.
            if id as usize > table.by_id.len() + 1_000_000 {
                return Err(SymbolTableError::BadId { line, value: id.to_string() });
            }
            table.insert(symbol, id);
        }
        Ok(table)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (id, symbol) in self.iter() {
            let _ = writeln!(out, "{symbol}\t{id}");
        }
        out
    }
}
