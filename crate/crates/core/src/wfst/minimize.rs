use std::collections::HashMap;

use super::{quantize, trim, Arc, Fst, FstError, Label, StateId};

type Signature = (i64, Vec<(Label, Label, i64, usize)>);

/// Merges states with identical futures, treating each arc's
/// (input, output, weight) triple as one opaque symbol.
///
/// The machine must be input-deterministic: no state may carry two arcs with
/// the same input label (epsilon included). Weights are compared after
/// quantization, so push first to expose more merges.
pub fn minimize(f: &Fst) -> Result<Fst, FstError> {
    for s in f.states() {
        let mut labels: Vec<Label> = f.arcs(s).iter().map(|a| a.ilabel).collect();
        labels.sort_unstable();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            return Err(FstError::NotDeterministic { state: s, label: w[0] });
        }
    }
    let f = trim(f);
    let n = f.num_states();
    if n == 0 {
        return Ok(f);
    }

    let mut class: Vec<usize> = {
        let mut ids = HashMap::new();
        f.states().map(|s| {
            let next = ids.len();
            *ids.entry(quantize(f.final_weight(s))).or_insert(next)
        }).collect()
    };
    let mut count = class.iter().max().map_or(0, |&c| c + 1);
    loop {
        let mut ids: HashMap<(usize, Signature), usize> = HashMap::new();
        let next_class: Vec<usize> = f
            .states()
            .map(|s| {
                let mut arcs: Vec<(Label, Label, i64, usize)> = f
                    .arcs(s)
                    .iter()
                    .map(|a| (a.ilabel, a.olabel, quantize(a.weight), class[a.nextstate as usize]))
                    .collect();
                arcs.sort_unstable();
                let sig = (class[s as usize], (quantize(f.final_weight(s)), arcs));
                let next = ids.len();
                *ids.entry(sig).or_insert(next)
            })
            .collect();
        let new_count = ids.len();
        class = next_class;
        if new_count == count {
            break;
        }
        count = new_count;
    }

    // Class ids are assigned in order of first (lowest) member, so the
    // lowest member serves as representative.
    let mut rep = vec![None; count];
    for s in f.states() {
        rep[class[s as usize]].get_or_insert(s);
    }
    let mut out = Fst::new();
    out.set_input_symbols(f.input_symbols().cloned());
    out.set_output_symbols(f.output_symbols().cloned());
    out.add_states(count);
    for (c, r) in rep.iter().enumerate() {
        let r = r.expect("every class has a member");
        let arcs = f
            .arcs(r)
            .iter()
            .map(|a| Arc { nextstate: class[a.nextstate as usize] as StateId, ..*a })
            .collect();
        out.set_arcs(c as StateId, arcs)?;
        out.set_final(c as StateId, f.final_weight(r))?;
    }
    out.set_start(class[f.start().expect("trimmed machine has a start") as usize] as StateId)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::{parse_att, shortest_path};
    use super::*;

    #[test]
    fn merges_equivalent_tails() {
        // Two identical branches after the first arc.
        let f = parse_att("0 1 1 1\n0 2 2 2\n1 3 3 3 0.5\n2 4 3 3 0.5\n3\n4\n", None, None).unwrap();
        let m = minimize(&f).unwrap();
        assert_eq!(m.num_states(), 3);
        assert_eq!(m.num_arcs(), 3);
    }

    #[test]
    fn keeps_distinct_weights_apart() {
        let f = parse_att("0 1 1 1\n0 2 2 2\n1 3 3 3 0.5\n2 4 3 3 0.7\n3\n4\n", None, None).unwrap();
        assert_eq!(minimize(&f).unwrap().num_states(), 4);
    }

    #[test]
    fn collapses_unrolled_loop() {
        let f = parse_att("0 1 1 1\n1 2 1 1\n2 0 1 1\n0\n1\n2\n", None, None).unwrap();
        let m = minimize(&f).unwrap();
        assert_eq!(m.num_states(), 1);
        assert_eq!(m.arcs(0), &[Arc::new(1, 1, 0.0, 0)]);
    }

    #[test]
    fn rejects_nondeterministic() {
        let f = parse_att("0 1 1 1\n0 2 1 1\n1\n2\n", None, None).unwrap();
        assert_eq!(minimize(&f), Err(FstError::NotDeterministic { state: 0, label: 1 }));
    }

    #[test]
    fn preserves_best_path() {
        let f = parse_att("0 1 1 5 0.3\n0 2 2 6\n1 3 3 7 0.2\n2 3 3 7 0.5\n3 0.1\n", None, None).unwrap();
        let m = minimize(&f).unwrap();
        let (a, b) = (shortest_path(&f).unwrap(), shortest_path(&m).unwrap());
        assert_eq!((a.ilabels, a.olabels), (b.ilabels, b.olabels));
        assert!(a.weight.approx_eq(b.weight, 1e-12));
    }
}
