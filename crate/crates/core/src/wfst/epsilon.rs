use std::collections::{BTreeMap, VecDeque};

use super::{trim, Arc, Fst, FstError, Label, Semiring, StateId, TropicalWeight, EPSILON};

fn is_epsilon(a: &Arc) -> bool {
    a.ilabel == EPSILON && a.olabel == EPSILON
}

/// Shortest distances from `q` over epsilon:epsilon arcs only.
fn epsilon_closure(f: &Fst, q: StateId) -> Result<BTreeMap<StateId, TropicalWeight>, FstError> {
    let mut dist = BTreeMap::from([(q, TropicalWeight::ONE)]);
    let mut queue = VecDeque::from([q]);
    let mut relaxations = 0usize;
    let limit = f.num_states().saturating_mul(f.num_states()).max(16);
    while let Some(s) = queue.pop_front() {
        let here = dist[&s];
        for a in f.arcs(s).iter().filter(|a| is_epsilon(a)) {
            let cand = here.times(a.weight);
            if dist.get(&a.nextstate).map_or(true, |cur| cand.value() < cur.value()) {
                relaxations += 1;
                if relaxations > limit {
                    return Err(FstError::NegativeCycle);
                }
                dist.insert(a.nextstate, cand);
                queue.push_back(a.nextstate);
            }
        }
    }
    Ok(dist)
}

/// Removes arcs that are epsilon on both sides, folding their weights into
/// the arcs and final weights they lead to. Arcs with epsilon on only one
/// side are kept. The result is trimmed.
pub fn rm_epsilon(f: &Fst) -> Result<Fst, FstError> {
    let mut out = f.clone();
    for q in f.states() {
        let closure = epsilon_closure(f, q)?;
        let mut merged: BTreeMap<(Label, Label, StateId), TropicalWeight> = BTreeMap::new();
        let mut fin = TropicalWeight::ZERO;
        let mut order = Vec::new();
        for (&r, &d) in &closure {
            fin = fin.plus(d.times(f.final_weight(r)));
            for a in f.arcs(r).iter().filter(|a| !is_epsilon(a)) {
                let key = (a.ilabel, a.olabel, a.nextstate);
                let w = d.times(a.weight);
                match merged.get_mut(&key) {
                    Some(cur) => *cur = cur.plus(w),
                    None => {
                        order.push(key);
                        merged.insert(key, w);
                    }
                }
            }
        }
        let arcs = order
            .into_iter()
            .map(|key| Arc { ilabel: key.0, olabel: key.1, weight: merged[&key], nextstate: key.2 })
            .collect();
        out.set_arcs(q, arcs)?;
        out.set_final(q, fin)?;
    }
    Ok(trim(&out))
}
