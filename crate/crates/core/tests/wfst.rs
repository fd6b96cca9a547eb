mod common;

use common::*;
use proptest::prelude::*;
use spikedec::wfst::{
    arcsort, compose, determinize, determinize_with, minimize, parse_att, push_weights, rm_epsilon, shortest_path, trim,
    write_att, ArcSortKey, DeterminizeConfig, Fst, FstError,
};

fn shape(states: usize, acyclic: bool, acceptor: bool) -> MachineShape {
    MachineShape { states, alphabet: 3, arcs_per_state: 3, epsilon: 0.2, acceptor, acyclic, max_weight: 4.0 }
}

fn is_deterministic(f: &Fst) -> bool {
    f.states().all(|s| {
        let mut labels: Vec<_> = f.arcs(s).iter().map(|a| a.ilabel).collect();
        let n = labels.len();
        labels.sort_unstable();
        labels.dedup();
        labels.len() == n && !labels.contains(&0)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn determinize_output_is_deterministic(seed in any::<u64>(), states in 2usize..=8) {
        let f = random_fst(&mut rng(seed), shape(states, true, true));
        let d = determinize(&f).unwrap();
        prop_assert!(is_deterministic(&d));
        prop_assert!(compare_maps(&relation(&f, 6), &relation(&d, 6), 1e-9).is_ok());
    }

    #[test]
    fn minimize_is_idempotent_and_never_grows(seed in any::<u64>(), states in 2usize..=8) {
        let d = random_deterministic_acceptor(&mut rng(seed), states, 3);
        let m = minimize(&d).unwrap();
        prop_assert!(m.num_states() <= trim(&d).num_states());
        prop_assert_eq!(minimize(&m).unwrap().num_states(), m.num_states());
    }

    #[test]
    fn att_text_round_trip(seed in any::<u64>(), states in 2usize..=8) {
        let f = random_fst(&mut rng(seed), shape(states, false, false));
        let back = parse_att(&write_att(&f, false), None, None).unwrap();
        prop_assert!(compare_maps(&relation(&f, 4), &relation(&back, 4), 1e-9).is_ok());
    }

    #[test]
    fn rm_epsilon_then_pushing_keeps_best_path(seed in any::<u64>(), states in 2usize..=8) {
        let f = trim(&random_fst(&mut rng(seed), shape(states, false, false)));
        prop_assume!(f.num_states() > 0);
        let best = shortest_path(&f).unwrap().weight.value();
        let pushed = push_weights(&rm_epsilon(&f).unwrap()).unwrap();
        prop_assert!((shortest_path(&pushed).unwrap().weight.value() - best).abs() < 1e-9);
    }

    #[test]
    fn arcsort_keeps_relation(seed in any::<u64>(), states in 2usize..=8) {
        let f = random_fst(&mut rng(seed), shape(states, false, false));
        let sorted = arcsort(&f, ArcSortKey::OLabel);
        prop_assert!(compare_maps(&relation(&f, 4), &relation(&sorted, 4), 1e-9).is_ok());
        prop_assert!(arcsort(&f, ArcSortKey::ILabel).is_ilabel_sorted());
    }
}

#[test]
fn compose_with_identity_is_neutral() {
    let mut r = rng(11);
    for _ in 0..20 {
        let f = random_fst(&mut r, shape(6, true, false));
        let mut id = Fst::new();
        let s = id.add_state();
        id.set_start(s).unwrap();
        id.set_final(s, 0.0).unwrap();
        for l in 1..=3 {
            id.add_arc(s, spikedec::wfst::Arc::new(l, l, 0.0, s)).unwrap();
        }
        let c = compose(&f, &id).unwrap();
        compare_maps(&relation(&f, 6), &relation(&c, 6), 1e-9).unwrap();
    }
}

#[test]
fn non_twins_machine_hits_budget() {
    // Two cycles on `a` with different weights from a common prefix: the
    // weighted subset construction never closes.
    let text = "0\t1\t1\t1\t0\n0\t2\t1\t1\t0\n1\t1\t1\t1\t1\n2\t2\t1\t1\t2\n1\t2\t2\t0\n2\t3\t3\t0\n3\n";
    let f = parse_att(text, None, None).unwrap();
    let err = determinize_with(&f, &DeterminizeConfig { state_budget: Some(50) }).unwrap_err();
    assert_eq!(err, FstError::DeterminizeBudget { budget: 50 });
}

