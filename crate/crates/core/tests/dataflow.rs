mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{gen, oracles};

#[test]
fn reaching_definitions_and_post_dominators_on_random_cfgs() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0dd5);
    for i in 0..500 {
        let ir = gen::random_ir(&mut rng, 10);
        oracles::check_reaching_definitions(&ir).unwrap_or_else(|e| panic!("cfg {i}: {e}"));
        oracles::check_post_dominance(&ir).unwrap_or_else(|e| panic!("cfg {i}: {e}"));
    }
}

#[test]
fn triplet_diff_matches_set_algebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7e1);
    for i in 0..2000 {
        let (v, f) = (gen::random_triplets(&mut rng), gen::random_triplets(&mut rng));
        oracles::check_triplet_algebra(&v, &f).unwrap_or_else(|e| panic!("pair {i}: {e}"));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn dataflow_oracles_hold(seed in any::<u64>(), blocks in 1usize..=10) {
        let ir = gen::random_ir(&mut ChaCha8Rng::seed_from_u64(seed), blocks);
        prop_assert!(oracles::check_reaching_definitions(&ir).is_ok());
        prop_assert!(oracles::check_post_dominance(&ir).is_ok());
    }

    #[test]
    fn identical_inputs_give_pure_context(seed in any::<u64>()) {
        let t = gen::random_triplets(&mut ChaCha8Rng::seed_from_u64(seed));
        let sig = jarsig::cpg::diff(&t, &t);
        prop_assert_eq!(&sig.ct, &t);
        prop_assert!(sig.pt.is_empty() && sig.nt.is_empty());
    }

    #[test]
    fn triplet_serialization_round_trips(seed in any::<u64>()) {
        let t = gen::random_triplets(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(jarsig::cpg::TripletSet::parse(&t.serialize()), Some(t));
    }
}
