mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tlpq_core::circuit::{Circuit, Gate};
use tlpq_core::partition::*;

use common::{brute_force_min_cut, random_connected_graph};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn stoer_wagner_is_optimal(seed in any::<u64>(), n in 2usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_connected_graph(&mut rng, n);
        let cut = global_min_cut(&g).unwrap();
        prop_assert_eq!(cut.weight(), brute_force_min_cut(&g));
        prop_assert!(cut.part(0).contains(&0));
        prop_assert!(!cut.part(1).is_empty());
    }

    #[test]
    fn bisection_is_balanced_and_no_better_than_min_cut(seed in any::<u64>(), n in 2usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_connected_graph(&mut rng, n);
        let b = balanced_bisection(&g).unwrap();
        let (a0, a1) = (b.part(0).len(), b.part(1).len());
        prop_assert!(a0.abs_diff(a1) <= 1);
        prop_assert!(b.weight() >= global_min_cut(&g).unwrap().weight());
    }

    #[test]
    fn cut_weight_counts_crossing_gates(pairs in proptest::collection::vec((0usize..5, 1usize..5), 0..20)) {
        let mut c = Circuit::new(5);
        for (q, d) in pairs {
            c.push(Gate::cz(q, (q + d) % 5)).unwrap();
        }
        let g = build_graph(&c).unwrap();
        prop_assert_eq!(g.total_weight(), c.len());
        let cut = global_min_cut(&g).unwrap();
        prop_assert_eq!(cut.weight(), cut.crossing_gate_indices().len());
        for &idx in cut.crossing_gate_indices() {
            let qs = c.gates()[idx].qubits();
            prop_assert_ne!(cut.part_of()[qs[0]], cut.part_of()[qs[1]]);
        }
    }
}

#[test]
fn invalid_cuts_are_rejected() {
    let g = CircuitGraph::from_edges(3, &[(0, 1, 1)]);
    assert!(matches!(g.cut_from_parts(vec![0, 0, 0]), Err(PartitionError::InvalidCut(_))));
    assert!(matches!(g.cut_from_parts(vec![0, 1]), Err(PartitionError::InvalidCut(_))));
    assert!(matches!(g.cut_from_parts(vec![0, 2, 1]), Err(PartitionError::InvalidCut(_))));
}
