use std::collections::VecDeque;

use super::{Fst, FstError, Label, Semiring, StateId, TropicalWeight, EPSILON};

/// Best accepting path. Label sequences have epsilons removed; `states`
/// lists every state visited, start first.
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    pub ilabels: Vec<Label>,
    pub olabels: Vec<Label>,
    pub weight: TropicalWeight,
    pub states: Vec<StateId>,
}

/// Label-correcting single-source shortest distances over an edge list given
/// as `edges[u] = [(v, w, tag)]`. Returns distances and the predecessor
/// `(u, tag)` of each reached node.
fn spfa(
    n: usize,
    sources: &[(usize, TropicalWeight)],
    edges: impl Fn(usize) -> Vec<(usize, TropicalWeight, usize)>,
) -> Result<(Vec<TropicalWeight>, Vec<Option<(usize, usize)>>), FstError> {
    let mut dist = vec![TropicalWeight::ZERO; n];
    let mut pred = vec![None; n];
    let mut in_queue = vec![false; n];
    let mut relaxed = vec![0usize; n];
    let mut queue = VecDeque::new();
    for &(s, w) in sources {
        if w.value() < dist[s].value() {
            dist[s] = w;
        }
        if !in_queue[s] {
            in_queue[s] = true;
            queue.push_back(s);
        }
    }
    while let Some(u) = queue.pop_front() {
        in_queue[u] = false;
        for (v, w, tag) in edges(u) {
            let cand = dist[u].times(w);
            if cand.value() < dist[v].value() {
                dist[v] = cand;
                pred[v] = Some((u, tag));
                relaxed[v] += 1;
                if relaxed[v] > n {
                    return Err(FstError::NegativeCycle);
                }
                if !in_queue[v] {
                    in_queue[v] = true;
                    queue.push_back(v);
                }
            }
        }
    }
    Ok((dist, pred))
}

/// For every state, the cheapest weight of reaching a final state
/// (including the final weight). Unreachable states get zero (+inf).
pub fn shortest_distance_to_final(f: &Fst) -> Result<Vec<TropicalWeight>, FstError> {
    let rev = f.reverse_adjacency();
    let sources: Vec<(usize, TropicalWeight)> =
        f.states().filter(|&s| f.is_final(s)).map(|s| (s as usize, f.final_weight(s))).collect();
    let (dist, _) = spfa(f.num_states(), &sources, |v| {
        rev[v].iter().map(|&(u, i)| (u as usize, f.arcs(u)[i].weight, i)).collect()
    })?;
    Ok(dist)
}

/// Cheapest accepting path. Ties resolve to the lower-numbered final state
/// and to the first-discovered predecessor.
pub fn shortest_path(f: &Fst) -> Result<Path, FstError> {
    let start = f.start().ok_or(FstError::NoAcceptingPath)?;
    let (dist, pred) = spfa(f.num_states(), &[(start as usize, TropicalWeight::ONE)], |u| {
        f.arcs(u as StateId).iter().enumerate().map(|(i, a)| (a.nextstate as usize, a.weight, i)).collect()
    })?;
    let mut best: Option<(StateId, TropicalWeight)> = None;
    for s in f.states() {
        let total = dist[s as usize].times(f.final_weight(s));
        if total.is_zero() {
            continue;
        }
        if best.map_or(true, |(_, w)| total.value() < w.value()) {
            best = Some((s, total));
        }
    }
    let (last, weight) = best.ok_or(FstError::NoAcceptingPath)?;

    let mut states = vec![last];
    let mut arcs = Vec::new();
    let mut cur = last as usize;
    while let Some((u, i)) = pred[cur] {
        arcs.push(f.arcs(u as StateId)[i]);
        states.push(u as StateId);
        cur = u;
        if states.len() > f.num_states() + 1 {
            // Only a zero-weight cycle through the start could loop here.
            break;
        }
    }
    states.reverse();
    arcs.reverse();
    Ok(Path {
        ilabels: arcs.iter().map(|a| a.ilabel).filter(|&l| l != EPSILON).collect(),
        olabels: arcs.iter().map(|a| a.olabel).filter(|&l| l != EPSILON).collect(),
        weight,
        states,
    })
}
