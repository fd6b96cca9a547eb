use std::collections::{BTreeMap, HashMap, VecDeque};

use super::{quantize, trim, Arc, Fst, FstError, Label, Semiring, StateId, TropicalWeight, EPSILON};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DeterminizeConfig {
    /// Maximum number of output states before giving up. `None` picks
    /// ten times the input's state count (at least 80).
    pub state_budget: Option<usize>,
}

impl Default for DeterminizeConfig {
    fn default() -> Self {
        Self { state_budget: None }
    }
}

/// One member of a subset: an input state plus the weight and output labels
/// owed relative to what the subset's incoming arc already emitted.
#[derive(Clone, Debug)]
struct Element {
    state: StateId,
    weight: TropicalWeight,
    residual: Vec<Label>,
}

type SubsetKey = Vec<(StateId, i64, Vec<Label>)>;

fn better(a: &Element, weight: TropicalWeight, residual: &[Label]) -> bool {
    weight.value() < a.weight.value()
        || (weight.value() == a.weight.value() && (residual.len(), residual) < (a.residual.len(), &a.residual[..]))
}

/// Keeps the best element per state and follows input-epsilon arcs.
fn close(f: &Fst, seeds: Vec<Element>, budget: usize) -> Result<BTreeMap<StateId, Element>, FstError> {
    let mut best: BTreeMap<StateId, Element> = BTreeMap::new();
    let mut work = Vec::new();
    for e in seeds {
        match best.get(&e.state) {
            Some(cur) if !better(cur, e.weight, &e.residual) => {}
            _ => {
                work.push(e.state);
                best.insert(e.state, e);
            }
        }
    }
    let mut steps = 0usize;
    while let Some(s) = work.pop() {
        let here = best[&s].clone();
        for arc in f.arcs(s).iter().filter(|a| a.ilabel == EPSILON && !a.weight.is_zero()) {
            steps += 1;
            if steps > budget {
                return Err(FstError::NegativeCycle);
            }
            let weight = here.weight.times(arc.weight);
            let mut residual = here.residual.clone();
            if arc.olabel != EPSILON {
                residual.push(arc.olabel);
            }
            let improve = best.get(&arc.nextstate).map_or(true, |cur| better(cur, weight, &residual));
            if improve {
                best.insert(arc.nextstate, Element { state: arc.nextstate, weight, residual });
                work.push(arc.nextstate);
            }
        }
    }
    Ok(best)
}

/// Normalizes a closed subset: subtracts the minimum weight and strips the
/// first label of the common output prefix. Returns the arc weight, the
/// emitted label and the subset.
fn normalize(mut elems: Vec<Element>) -> (TropicalWeight, Label, Vec<Element>) {
    let min = elems.iter().map(|e| e.weight).fold(TropicalWeight::ZERO, TropicalWeight::plus);
    let first = elems[0].residual.first().copied();
    let shared = first.filter(|&l| elems.iter().all(|e| e.residual.first() == Some(&l)));
    for e in &mut elems {
        e.weight = TropicalWeight::new(e.weight.value() - min.value());
        if shared.is_some() {
            e.residual.remove(0);
        }
    }
    (min, shared.unwrap_or(EPSILON), elems)
}

fn key_of(elems: &[Element]) -> SubsetKey {
    elems.iter().map(|e| (e.state, quantize(e.weight), e.residual.clone())).collect()
}

pub fn determinize(f: &Fst) -> Result<Fst, FstError> {
    determinize_with(f, &DeterminizeConfig::default())
}

/// Weighted subset construction over the tropical semiring.
///
/// The result has no input-epsilon arcs except for the chains that flush
/// pending output at final states, and at most one arc per input label per
/// state. For each input string its weight is the minimum over paths of the
/// input machine. Outputs are preserved exactly when the input is functional
/// (acceptors always are); otherwise the output of a cheapest path is kept.
pub fn determinize_with(f: &Fst, cfg: &DeterminizeConfig) -> Result<Fst, FstError> {
    let budget = cfg.state_budget.unwrap_or(10 * f.num_states().max(8));
    let mut out = Fst::new();
    out.set_input_symbols(f.input_symbols().cloned());
    out.set_output_symbols(f.output_symbols().cloned());
    let Some(start) = f.start() else { return Ok(out) };

    let closure_budget = budget.saturating_mul(f.num_states().max(1));
    let init = close(f, vec![Element { state: start, weight: TropicalWeight::ONE, residual: Vec::new() }], closure_budget)?;
    let init: Vec<Element> = init.into_values().collect();

    let mut ids: HashMap<SubsetKey, StateId> = HashMap::new();
    let mut queue: VecDeque<(StateId, Vec<Element>)> = VecDeque::new();
    let mut subsets = 1usize;
    ids.insert(key_of(&init), 0);
    queue.push_back((0, init));
    out.add_state();
    out.set_start(0)?;

    while let Some((src, subset)) = queue.pop_front() {
        let mut by_label: BTreeMap<Label, Vec<Element>> = BTreeMap::new();
        for e in &subset {
            for arc in f.arcs(e.state).iter().filter(|a| a.ilabel != EPSILON && !a.weight.is_zero()) {
                let mut residual = e.residual.clone();
                if arc.olabel != EPSILON {
                    residual.push(arc.olabel);
                }
                by_label.entry(arc.ilabel).or_default().push(Element {
                    state: arc.nextstate,
                    weight: e.weight.times(arc.weight),
                    residual,
                });
            }
        }
        let mut arcs = Vec::new();

        // Final weight: cheapest final member. Output it still owes is
        // flushed along an epsilon-input chain.
        let final_member = subset
            .iter()
            .map(|e| (e.weight.times(f.final_weight(e.state)), &e.residual))
            .filter(|(w, _)| !w.is_zero())
            .min_by(|a, b| a.0.value().total_cmp(&b.0.value()).then_with(|| (a.1.len(), a.1).cmp(&(b.1.len(), b.1))));
        if let Some((w, residual)) = final_member {
            if residual.is_empty() {
                out.set_final(src, w)?;
            } else {
                let mut prev = None;
                for &label in residual {
                    let n = out.add_state();
                    match prev {
                        None => arcs.push(Arc { ilabel: EPSILON, olabel: label, weight: w, nextstate: n }),
                        Some(p) => out.add_arc(p, Arc::new(EPSILON, label, 0.0, n))?,
                    }
                    prev = Some(n);
                }
                out.set_final(prev.expect("non-empty residual"), TropicalWeight::ONE)?;
            }
        }

        for (label, seeds) in by_label {
            let closed: Vec<Element> = close(f, seeds, closure_budget)?.into_values().collect();
            let (weight, olabel, elems) = normalize(closed);
            let key = key_of(&elems);
            let dst = match ids.get(&key) {
                Some(&id) => id,
                None => {
                    if subsets >= budget {
                        return Err(FstError::DeterminizeBudget { budget });
                    }
                    subsets += 1;
                    let id = out.add_state();
                    ids.insert(key, id);
                    queue.push_back((id, elems));
                    id
                }
            };
            arcs.push(Arc { ilabel: label, olabel, weight, nextstate: dst });
        }
        out.set_arcs(src, arcs)?;
    }
    Ok(trim(&out))
}
