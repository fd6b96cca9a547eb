//! A small weighted finite-state transducer toolkit over the tropical semiring.
//!
//! Machines are stored as per-state adjacency lists. Every operation returns a
//! new machine; nothing is computed lazily. Label 0 is epsilon on both sides.

mod compose;
mod determinize;
mod epsilon;
mod minimize;
mod push;
mod shortest;
mod symbols;
mod text;

pub use compose::compose;
pub use determinize::{determinize, determinize_with, DeterminizeConfig};
pub use epsilon::rm_epsilon;
pub use minimize::minimize;
pub use push::push_weights;
pub use shortest::{shortest_distance_to_final, shortest_path, Path};
pub use symbols::{SymbolTable, SymbolTableError};
pub use text::{parse_att, write_att, AttError};

use std::fmt;

use thiserror::Error;

pub type Label = u32;
pub type StateId = u32;

pub const EPSILON: Label = 0;

/// Quantum used when weights must be compared for exact equality (state
/// merging in minimization, subset identity in determinization).
pub(crate) const WEIGHT_QUANTUM: f64 = 1e-10;

pub(crate) fn quantize(w: TropicalWeight) -> i64 {
    if w.is_zero() {
        i64::MAX
    } else {
        (w.value() / WEIGHT_QUANTUM).round() as i64
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FstError {
    #[error("state {0} does not exist")]
    InvalidState(StateId),
    #[error("symbol table mismatch between composed machines")]
    SymbolTableMismatch,
    #[error("determinization exceeded its state budget of {budget}; the input may not be determinizable")]
    DeterminizeBudget { budget: usize },
    #[error("minimization requires an input-deterministic machine (state {state} repeats label {label})")]
    NotDeterministic { state: StateId, label: Label },
    #[error("state {0} cannot reach a final state; trim before pushing")]
    NotCoaccessible(StateId),
    #[error("machine has no accepting path")]
    NoAcceptingPath,
    #[error("negative-weight cycle detected")]
    NegativeCycle,
}

/// Semiring operations shared by weight types.
pub trait Semiring: Copy + PartialEq + fmt::Debug {
    fn zero() -> Self;
    fn one() -> Self;
    fn plus(self, other: Self) -> Self;
    fn times(self, other: Self) -> Self;
}

/// Tropical weight: `plus` is min, `times` is addition, zero is +inf.
///
/// Values are negative-log costs. Negative values are allowed (back-off
/// weights above one produce them); NaN is not.
#[derive(Clone, Copy, PartialEq, PartialOrd)]
pub struct TropicalWeight(f64);

impl TropicalWeight {
    pub const ZERO: Self = Self(f64::INFINITY);
    pub const ONE: Self = Self(0.0);

    pub fn new(value: f64) -> Self {
        assert!(!value.is_nan(), "tropical weight cannot be NaN");
        Self(value)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == f64::INFINITY
    }

    pub fn approx_eq(self, other: Self, delta: f64) -> bool {
        if self.is_zero() || other.is_zero() {
            return self.is_zero() && other.is_zero();
        }
        (self.0 - other.0).abs() <= delta
    }
}

impl Semiring for TropicalWeight {
    fn zero() -> Self {
        Self::ZERO
    }

    fn one() -> Self {
        Self::ONE
    }

    fn plus(self, other: Self) -> Self {
        if other.0 < self.0 {
            other
        } else {
            self
        }
    }

    fn times(self, other: Self) -> Self {
        if self.is_zero() || other.is_zero() {
            Self::ZERO
        } else {
            Self(self.0 + other.0)
        }
    }
}

impl fmt::Debug for TropicalWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for TropicalWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            f.write_str("Infinity")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl From<f64> for TropicalWeight {
    fn from(v: f64) -> Self {
        Self::new(v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arc {
    pub ilabel: Label,
    pub olabel: Label,
    pub weight: TropicalWeight,
    pub nextstate: StateId,
}

impl Arc {
    pub fn new(ilabel: Label, olabel: Label, weight: impl Into<TropicalWeight>, nextstate: StateId) -> Self {
        Self { ilabel, olabel, weight: weight.into(), nextstate }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct State {
    arcs: Vec<Arc>,
    final_weight: TropicalWeight,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArcSortKey {
    ILabel,
    OLabel,
}

/// Mutable vector-backed transducer.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Fst {
    states: Vec<State>,
    start: Option<StateId>,
    isyms: Option<SymbolTable>,
    osyms: Option<SymbolTable>,
    sorted: Option<ArcSortKey>,
}

impl Fst {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_state(&mut self) -> StateId {
        self.states.push(State { arcs: Vec::new(), final_weight: TropicalWeight::ZERO });
        (self.states.len() - 1) as StateId
    }

    pub fn add_states(&mut self, n: usize) {
        for _ in 0..n {
            self.add_state();
        }
    }

    fn check(&self, s: StateId) -> Result<(), FstError> {
        if (s as usize) < self.states.len() {
            Ok(())
        } else {
            Err(FstError::InvalidState(s))
        }
    }

    pub fn set_start(&mut self, s: StateId) -> Result<(), FstError> {
        self.check(s)?;
        self.start = Some(s);
        Ok(())
    }

    pub fn start(&self) -> Option<StateId> {
        self.start
    }

    pub fn set_final(&mut self, s: StateId, weight: impl Into<TropicalWeight>) -> Result<(), FstError> {
        self.check(s)?;
        self.states[s as usize].final_weight = weight.into();
        Ok(())
    }

    pub fn final_weight(&self, s: StateId) -> TropicalWeight {
        self.states[s as usize].final_weight
    }

    pub fn is_final(&self, s: StateId) -> bool {
        !self.final_weight(s).is_zero()
    }

    pub fn add_arc(&mut self, s: StateId, arc: Arc) -> Result<(), FstError> {
        self.check(s)?;
        self.check(arc.nextstate)?;
        self.states[s as usize].arcs.push(arc);
        self.sorted = None;
        Ok(())
    }

    pub fn arcs(&self, s: StateId) -> &[Arc] {
        &self.states[s as usize].arcs
    }

    /// Replaces the arcs of `s`; targets must be valid states.
    pub fn set_arcs(&mut self, s: StateId, arcs: Vec<Arc>) -> Result<(), FstError> {
        self.check(s)?;
        for arc in &arcs {
            self.check(arc.nextstate)?;
        }
        self.states[s as usize].arcs = arcs;
        self.sorted = None;
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_arcs(&self) -> usize {
        self.states.iter().map(|s| s.arcs.len()).sum()
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> {
        0..self.states.len() as StateId
    }

    pub fn input_symbols(&self) -> Option<&SymbolTable> {
        self.isyms.as_ref()
    }

    pub fn output_symbols(&self) -> Option<&SymbolTable> {
        self.osyms.as_ref()
    }

    pub fn set_input_symbols(&mut self, table: Option<SymbolTable>) {
        self.isyms = table;
    }

    pub fn set_output_symbols(&mut self, table: Option<SymbolTable>) {
        self.osyms = table;
    }

    /// Applies `f` to every arc in place.
    pub fn map_arcs(&mut self, mut f: impl FnMut(&mut Arc)) {
        for state in &mut self.states {
            state.arcs.iter_mut().for_each(&mut f);
        }
        self.sorted = None;
    }

    pub fn is_ilabel_sorted(&self) -> bool {
        self.sorted == Some(ArcSortKey::ILabel)
    }

    /// Arcs of `s` carrying input `label`; requires an ilabel arcsort.
    pub fn arcs_with_ilabel(&self, s: StateId, label: Label) -> &[Arc] {
        debug_assert!(self.is_ilabel_sorted(), "arcs_with_ilabel needs an ilabel-sorted machine");
        let arcs = self.arcs(s);
        let lo = arcs.partition_point(|a| a.ilabel < label);
        let hi = lo + arcs[lo..].partition_point(|a| a.ilabel == label);
        &arcs[lo..hi]
    }

    /// Predecessor lists: for each state, the states with an arc into it.
    pub(crate) fn reverse_adjacency(&self) -> Vec<Vec<(StateId, usize)>> {
        let mut rev = vec![Vec::new(); self.num_states()];
        for s in self.states() {
            for (i, arc) in self.arcs(s).iter().enumerate() {
                rev[arc.nextstate as usize].push((s, i));
            }
        }
        rev
    }
}

/// Stable sort of every state's arcs by input (or output) label.
pub fn arcsort(f: &Fst, by: ArcSortKey) -> Fst {
    let mut out = f.clone();
    for state in &mut out.states {
        match by {
            ArcSortKey::ILabel => state.arcs.sort_by_key(|a| (a.ilabel, a.olabel)),
            ArcSortKey::OLabel => state.arcs.sort_by_key(|a| (a.olabel, a.ilabel)),
        }
    }
    out.sorted = Some(by);
    out
}

fn accessible(f: &Fst) -> Vec<bool> {
    let mut seen = vec![false; f.num_states()];
    let Some(start) = f.start() else { return seen };
    let mut stack = vec![start];
    seen[start as usize] = true;
    while let Some(s) = stack.pop() {
        for arc in f.arcs(s) {
            if !seen[arc.nextstate as usize] {
                seen[arc.nextstate as usize] = true;
                stack.push(arc.nextstate);
            }
        }
    }
    seen
}

pub(crate) fn coaccessible(f: &Fst) -> Vec<bool> {
    let rev = f.reverse_adjacency();
    let mut seen = vec![false; f.num_states()];
    let mut stack: Vec<StateId> = f.states().filter(|&s| f.is_final(s)).collect();
    for &s in &stack {
        seen[s as usize] = true;
    }
    while let Some(s) = stack.pop() {
        for &(p, _) in &rev[s as usize] {
            if !seen[p as usize] {
                seen[p as usize] = true;
                stack.push(p);
            }
        }
    }
    seen
}

/// Keeps states that are both reachable from the start and can reach a final
/// state, renumbered in their original order.
pub fn trim(f: &Fst) -> Fst {
    let acc = accessible(f);
    let coacc = coaccessible(f);
    let mut remap = vec![None; f.num_states()];
    let mut out = Fst { isyms: f.isyms.clone(), osyms: f.osyms.clone(), ..Fst::default() };
    for s in f.states() {
        if acc[s as usize] && coacc[s as usize] {
            remap[s as usize] = Some(out.add_state());
        }
    }
    for s in f.states() {
        let Some(new) = remap[s as usize] else { continue };
        out.states[new as usize].final_weight = f.final_weight(s);
        out.states[new as usize].arcs = f
            .arcs(s)
            .iter()
            .filter_map(|a| remap[a.nextstate as usize].map(|n| Arc { nextstate: n, ..*a }))
            .collect();
    }
    out.start = f.start().and_then(|s| remap[s as usize]);
    if out.start.is_none() {
        out.states.clear();
    }
    out
}

/// Rewrites the input labels in `labels` to epsilon.
pub fn relabel_input_to_epsilon(f: &Fst, labels: &dyn Fn(Label) -> bool) -> Fst {
    let mut out = f.clone();
    out.map_arcs(|a| {
        if labels(a.ilabel) {
            a.ilabel = EPSILON;
        }
    });
    out
}

/// Linear acceptor (or transducer when `olabels` differs) for one string.
pub fn linear_fst(ilabels: &[Label], olabels: &[Label], weight: f64) -> Fst {
    assert_eq!(ilabels.len(), olabels.len());
    let mut f = Fst::new();
    let mut s = f.add_state();
    f.set_start(s).expect("fresh state");
    for (&i, &o) in ilabels.iter().zip(olabels) {
        let n = f.add_state();
        f.add_arc(s, Arc::new(i, o, 0.0, n)).expect("fresh states");
        s = n;
    }
    f.set_final(s, weight).expect("fresh state");
    f
}
