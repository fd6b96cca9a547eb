use std::collections::HashMap;

use super::{arcsort, trim, Arc, ArcSortKey, Fst, FstError, Semiring, StateId, EPSILON};

/// Filter state for epsilon handling: after the left machine moves alone on
/// an epsilon output the right machine may not move alone (and vice versa)
/// until a real match happens. This keeps exactly one path per pair of
/// epsilon interleavings.
const FILTER_CLEAR: u8 = 0;
const FILTER_LEFT: u8 = 1;
const FILTER_RIGHT: u8 = 2;

/// Composition `a ∘ b`: maps `x` to `z` with weight min over `y` of
/// `a(x, y) + b(y, z)`. The result is trimmed.
pub fn compose(a: &Fst, b: &Fst) -> Result<Fst, FstError> {
    if let (Some(ao), Some(bi)) = (a.output_symbols(), b.input_symbols()) {
        if ao != bi {
            return Err(FstError::SymbolTableMismatch);
        }
    }
    let mut out = Fst::new();
    out.set_input_symbols(a.input_symbols().cloned());
    out.set_output_symbols(b.output_symbols().cloned());
    let (Some(sa), Some(sb)) = (a.start(), b.start()) else { return Ok(out) };

    let b = arcsort(b, ArcSortKey::ILabel);
    let mut ids: HashMap<(StateId, StateId, u8), StateId> = HashMap::new();
    let mut queue = Vec::new();
    let mut intern = |out: &mut Fst, queue: &mut Vec<(StateId, StateId, u8)>, key: (StateId, StateId, u8)| {
        *ids.entry(key).or_insert_with(|| {
            queue.push(key);
            out.add_state()
        })
    };

    let start = intern(&mut out, &mut queue, (sa, sb, FILTER_CLEAR));
    out.set_start(start)?;
    // States are numbered in discovery order, so the queue index is the id.
    let mut next = 0;
    while next < queue.len() {
        let (qa, qb, filter) = queue[next];
        let src = next as StateId;
        next += 1;
        let mut arcs = Vec::new();
        for arc_a in a.arcs(qa) {
            if arc_a.olabel == EPSILON {
                if filter != FILTER_RIGHT {
                    let dst = intern(&mut out, &mut queue, (arc_a.nextstate, qb, FILTER_LEFT));
                    arcs.push(Arc { nextstate: dst, ..*arc_a });
                }
                if filter == FILTER_CLEAR {
                    for arc_b in b.arcs_with_ilabel(qb, EPSILON) {
                        let dst = intern(&mut out, &mut queue, (arc_a.nextstate, arc_b.nextstate, FILTER_CLEAR));
                        arcs.push(Arc {
                            ilabel: arc_a.ilabel,
                            olabel: arc_b.olabel,
                            weight: arc_a.weight.times(arc_b.weight),
                            nextstate: dst,
                        });
                    }
                }
            } else {
                for arc_b in b.arcs_with_ilabel(qb, arc_a.olabel) {
                    let dst = intern(&mut out, &mut queue, (arc_a.nextstate, arc_b.nextstate, FILTER_CLEAR));
                    arcs.push(Arc {
                        ilabel: arc_a.ilabel,
                        olabel: arc_b.olabel,
                        weight: arc_a.weight.times(arc_b.weight),
                        nextstate: dst,
                    });
                }
            }
        }
        if filter != FILTER_LEFT {
            for arc_b in b.arcs_with_ilabel(qb, EPSILON) {
                let dst = intern(&mut out, &mut queue, (qa, arc_b.nextstate, FILTER_RIGHT));
                arcs.push(Arc { ilabel: EPSILON, nextstate: dst, ..*arc_b });
            }
        }
        out.set_arcs(src, arcs)?;
        out.set_final(src, a.final_weight(qa).times(b.final_weight(qb)))?;
    }
    Ok(trim(&out))
}
