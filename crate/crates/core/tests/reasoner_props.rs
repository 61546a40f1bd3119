mod common;

use std::collections::BTreeSet;

use dfd_core::graph::{lower, vocab, Name};
use dfd_core::turtle::{parse_turtle, to_turtle};
use dfd_core::{materialize, RuleSet, Taxonomy};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{naive_materialize, random_model};

fn graph(seed: u64) -> dfd_core::KnowledgeGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    lower(&random_model(&mut rng, 12), &Taxonomy::starter()).unwrap()
}

fn rules() -> RuleSet {
    RuleSet::standard(&Taxonomy::starter())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inverse_and_symmetry_complete(seed in any::<u64>()) {
        let g = materialize(&graph(seed), &rules()).unwrap();
        let t = g.named_triples();
        let pairs = [
            (vocab::HAS_SOURCE, vocab::IS_SOURCE_OF),
            (vocab::HAS_TARGET, vocab::IS_TARGET_OF),
        ];
        for (s, p, o) in &t {
            for (a, b) in pairs {
                if *p == Name::bm(a) {
                    prop_assert!(t.contains(&(o.clone(), Name::bm(b), s.clone())));
                }
                if *p == Name::bm(b) {
                    prop_assert!(t.contains(&(o.clone(), Name::bm(a), s.clone())));
                }
            }
            if *p == Name::bm(vocab::RELATES) {
                prop_assert!(t.contains(&(o.clone(), p.clone(), s.clone())));
                prop_assert_ne!(s, o);
            }
        }
    }

    #[test]
    fn adding_facts_never_removes_conclusions(seed in any::<u64>(), extra in prop::collection::vec((0usize..40, 0usize..40), 1..6)) {
        let g = graph(seed);
        let before = materialize(&g, &rules()).unwrap().named_triples();
        let terms: Vec<Name> = g.named_triples().into_iter().map(|(s, _, _)| s).collect::<BTreeSet<_>>().into_iter().collect();
        let mut bigger = g.clone();
        for (i, j) in extra {
            let (a, b) = (&terms[i % terms.len()], &terms[j % terms.len()]);
            bigger.insert_names(a, &Name::bm(vocab::HAS_TARGET), b).unwrap();
        }
        let after = materialize(&bigger, &rules()).unwrap().named_triples();
        prop_assert!(before.is_subset(&after));
        prop_assert_eq!(after, naive_materialize(&bigger, &rules()));
    }

    #[test]
    fn reasoned_turtle_is_a_fixpoint(seed in any::<u64>()) {
        let reasoned = materialize(&graph(seed), &rules()).unwrap();
        let text = to_turtle(&reasoned, "d");
        let back = parse_turtle(&text).unwrap();
        prop_assert!(back == reasoned);
        let again = materialize(&back, &rules()).unwrap();
        prop_assert_eq!(again.named_triples(), back.named_triples());
        prop_assert_eq!(to_turtle(&back, "d"), text);
    }
}

#[test]
fn core_rules_alone_match_oracle() {
    for seed in 0..50 {
        let g = graph(seed);
        let r = RuleSet::core();
        assert_eq!(materialize(&g, &r).unwrap().named_triples(), naive_materialize(&g, &r), "seed {seed}");
    }
}

#[test]
fn single_rule_sets_match_oracle() {
    let all = RuleSet::core().rules;
    for rule in all {
        let r = RuleSet {
            rules: vec![rule.clone()],
            max_triples: None,
        };
        for seed in 0..20 {
            let g = graph(seed);
            assert_eq!(
                materialize(&g, &r).unwrap().named_triples(),
                naive_materialize(&g, &r),
                "{rule:?}, seed {seed}"
            );
        }
    }
}

#[test]
fn explicit_facts_carry_no_derived_predicates() {
    for seed in 0..50 {
        let g = graph(seed);
        for (_, p, _) in g.named_triples() {
            for derived in [
                vocab::IS_SOURCE_OF,
                vocab::IS_TARGET_OF,
                vocab::IS_EDGE_OF,
                vocab::RELATES,
                vocab::IS_AFFECTED_BY,
            ] {
                assert_ne!(p, Name::bm(derived));
            }
        }
    }
}
