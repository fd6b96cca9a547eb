use super::{shortest_distance_to_final, Arc, Fst, FstError, TropicalWeight};

const SNAP: f64 = 1e-12;

fn snapped(v: f64) -> TropicalWeight {
    TropicalWeight::new(if v.abs() < SNAP { 0.0 } else { v })
}

/// Moves weight toward the start state: afterwards every state other than the
/// start has a zero-cost continuation to a final state, and the start's
/// arcs carry the total cost of the best path through them.
///
/// Every state must be able to reach a final state.
pub fn push_weights(f: &Fst) -> Result<Fst, FstError> {
    let mut out = f.clone();
    let Some(start) = f.start() else { return Ok(out) };
    let dist = shortest_distance_to_final(f)?;
    if let Some(s) = f.states().find(|&s| dist[s as usize].is_zero()) {
        return Err(FstError::NotCoaccessible(s));
    }
    let d = |s: u32| dist[s as usize].value();

    for s in f.states() {
        let arcs = f
            .arcs(s)
            .iter()
            .map(|a| Arc { weight: reweight(a.weight, d(a.nextstate) - d(s)), ..*a })
            .collect();
        out.set_arcs(s, arcs)?;
        out.set_final(s, reweight(f.final_weight(s), -d(s)))?;
    }

    // The start keeps the total. If paths re-enter the start, give the total
    // to a fresh copy so the cycle does not pay it twice.
    let total = d(start);
    let reenters = f.states().any(|s| f.arcs(s).iter().any(|a| a.nextstate == start));
    let new_start = if reenters { out.add_state() } else { start };
    let arcs = out.arcs(start).iter().map(|a| Arc { weight: reweight(a.weight, total), ..*a }).collect();
    let fin = reweight(out.final_weight(start), total);
    out.set_arcs(new_start, arcs)?;
    out.set_final(new_start, fin)?;
    out.set_start(new_start)?;
    Ok(out)
}

fn reweight(w: TropicalWeight, delta: f64) -> TropicalWeight {
    if w.is_zero() {
        w
    } else {
        snapped(w.value() + delta)
    }
}
