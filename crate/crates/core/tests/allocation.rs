mod common;

use common::*;
use fairdispatch_core::allocation::{allocate, Algorithm};
use fairdispatch_core::model::lar;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn every_allocator_is_feasible(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance(&mut rng, 30, 8, 4);
        let mut counts = Vec::new();
        for algo in Algorithm::ALL {
            let mut ledgers = inst.ledgers.clone();
            let r = allocate(algo, &inst.graph, &mut ledgers, seed).unwrap();
            prop_assert!(r.check_feasible(&inst.graph, &inst.caps).is_ok());
            prop_assert_eq!(r.allocated_count() + r.unallocated.len(), inst.graph.tasks.len());
            for l in ledgers.iter() {
                prop_assert_eq!(lar(l), l.lar_fraction().value());
                prop_assert!(l.allocated().len() <= l.capacity() as usize);
            }
            counts.push((algo, r.allocated_count()));
        }
        let best = counts.iter().find(|(a, _)| *a == Algorithm::Mcf).unwrap().1;
        prop_assert!(counts.iter().all(|&(_, c)| c <= best));
    }

    #[test]
    fn mcf_is_optimal_on_small_instances(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance(&mut rng, 9, 5, 3);
        let mut ledgers = inst.ledgers.clone();
        let r = allocate(Algorithm::Mcf, &inst.graph, &mut ledgers, 0).unwrap();
        prop_assert_eq!(r.allocated_count(), brute_force_max(&inst.graph, &inst.caps));
    }
}

#[test]
fn deterministic_given_seed() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let inst = random_instance(&mut rng, 40, 8, 3);
    for algo in Algorithm::ALL {
        let go = || {
            let mut l = inst.ledgers.clone();
            allocate(algo, &inst.graph, &mut l, 9).unwrap()
        };
        assert_eq!(go(), go(), "{algo}");
    }
}

#[test]
fn unknown_candidate_is_rejected() {
    let (g, _) = graph(&[(1, 100, vec![(1, 0.0)])], &[(1, 1)]);
    let mut fresh = fairdispatch_core::model::Ledgers::new([(fairdispatch_core::model::WorkerId(1), 1)]);
    for algo in Algorithm::ALL {
        assert!(allocate(algo, &g, &mut fresh, 0).is_err(), "{algo}");
    }
    let mut none = fairdispatch_core::model::Ledgers::new([]);
    assert!(allocate(Algorithm::FAware, &g, &mut none, 0).is_err());
}
