mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use jarsig::ir::lift_method;
use jarsig::normalize::normalize;

use common::{gen, oracles, variant_pairs};

fn vectors(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<i32>> {
    (0..n).map(|_| gen::int_args(rng)).collect()
}

/// Argument vectors cut down to the two parameters of the fixture methods.
fn pair_vectors(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<i32>> {
    vectors(rng, n).into_iter().map(|mut v| {
        v.truncate(2);
        v
    }).collect()
}

#[test]
fn variant_pairs_converge() {
    let pairs = variant_pairs();
    assert_eq!(pairs.len(), 6);
    for (name, a, b) in &pairs {
        let la = lift_method(a, &a.methods[0]).unwrap();
        let lb = lift_method(b, &b.methods[0]).unwrap();
        assert_ne!(la, lb, "{name}: the pair should differ before normalization");
        assert_eq!(normalize(&la).dump(), normalize(&lb).dump(), "{name}");
    }
}

#[test]
fn variant_pairs_preserve_semantics() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (name, a, b) in variant_pairs() {
        let vs = pair_vectors(&mut rng, 200);
        for class in [&a, &b] {
            oracles::check_semantics(class, 0, &vs).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }
}

#[test]
fn idempotent_on_corpus_methods() {
    let mut checked = 0;
    for cve in jarsig::corpus::synthetic_cves().unwrap() {
        for class in cve.pre.iter().chain(&cve.post) {
            for m in class.methods.iter().filter(|m| m.code().is_some()) {
                let once = normalize(&lift_method(class, m).unwrap());
                assert_eq!(normalize(&once), once, "{}", class.name().unwrap());
                checked += 1;
            }
        }
    }
    assert!(checked > 30);
}

#[test]
fn random_methods_keep_semantics_and_converge_under_type1() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for i in 0..300 {
        let src = gen::int_method_source(&mut rng);
        let class = oracles::assemble_one(&src).unwrap();
        let vs = vectors(&mut rng, 30);
        oracles::check_semantics(&class, 0, &vs).unwrap_or_else(|e| panic!("method {i}: {e}\n{src}"));
        oracles::check_variant(&class, &vs, &mut rng).unwrap_or_else(|e| panic!("method {i}: {e}\n{src}"));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalization_is_idempotent_and_sound(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let class = oracles::assemble_one(&gen::int_method_source(&mut rng)).unwrap();
        let vs = vectors(&mut rng, 10);
        let r = oracles::check_semantics(&class, 0, &vs);
        prop_assert!(r.is_ok(), "{}", r.unwrap_err());
    }

    #[test]
    fn type1_variant_is_equivalent(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let class = oracles::assemble_one(&gen::int_method_source(&mut rng)).unwrap();
        let vs = vectors(&mut rng, 10);
        let r = oracles::check_variant(&class, &vs, &mut rng);
        prop_assert!(r.is_ok(), "{}", r.unwrap_err());
    }
}
