use std::collections::{BTreeMap, BTreeSet};

use dfd_core::evaluation::{default_mappings, evaluate_corpus, LabelSet};
use dfd_core::graph::Name;
use dfd_core::pattern::{MatchRow, PatternReport};
use proptest::prelude::*;

fn row() -> MatchRow {
    MatchRow {
        bindings: BTreeMap::from([("target".to_string(), Name::local("process0"))]),
    }
}

/// A label set obeying the exclusion rules.
fn criteria() -> impl Strategy<Value = BTreeSet<u8>> {
    prop::collection::btree_set(1u8..=5, 0..4).prop_map(|mut s| {
        if s.contains(&2) {
            s.remove(&1);
        }
        if s.contains(&5) {
            s.remove(&3);
            s.remove(&4);
        }
        s
    })
}

const PATTERNS: [&str; 6] = ["3-2", "3-3", "3-4", "4-1", "4-2", "4-3"];

fn corpus() -> impl Strategy<Value = Vec<(BTreeSet<u8>, BTreeSet<usize>)>> {
    prop::collection::vec((criteria(), prop::collection::btree_set(0..PATTERNS.len(), 0..4)), 0..40)
}

fn build(corpus: &[(BTreeSet<u8>, BTreeSet<usize>)]) -> (Vec<PatternReport>, LabelSet) {
    let mut labels = LabelSet::default();
    let mut reports = Vec::new();
    for (i, (c, matched)) in corpus.iter().enumerate() {
        let id = format!("d{i:03}");
        labels.insert(id.clone(), c.clone()).unwrap();
        let matches = PATTERNS
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let rows = if matched.contains(&k) { vec![row(), row()] } else { Vec::new() };
                (p.to_string(), rows)
            })
            .collect();
        reports.push(PatternReport { diagram_id: id, matches });
    }
    (reports, labels)
}

proptest! {
    #[test]
    fn counts_are_conserved(c in corpus()) {
        let (reports, labels) = build(&c);
        for r in evaluate_corpus(&reports, &labels, &default_mappings()) {
            prop_assert_eq!(r.positive + r.false_positive, r.detected);
            prop_assert_eq!(r.positive + r.false_negative, r.total_criteria);
            prop_assert!(r.detected as usize <= c.len());
        }
    }

    #[test]
    fn report_order_does_not_matter(c in corpus(), shuffle in any::<u64>()) {
        let (mut reports, labels) = build(&c);
        let expected = evaluate_corpus(&reports, &labels, &default_mappings());
        let n = reports.len();
        if n > 1 {
            for i in 0..n {
                let j = (shuffle as usize).wrapping_mul(i + 7) % n;
                reports.swap(i, j);
            }
        }
        reports.reverse();
        prop_assert_eq!(evaluate_corpus(&reports, &labels, &default_mappings()), expected);
    }

    #[test]
    fn perfect_detector_scores_one(labels in prop::collection::vec(criteria(), 1..40)) {
        let mappings = default_mappings();
        let mut set = LabelSet::default();
        let mut reports = Vec::new();
        for (i, c) in labels.iter().enumerate() {
            let id = format!("d{i}");
            set.insert(id.clone(), c.clone()).unwrap();
            // each mapping's patterns fire exactly when its criteria are labeled;
            // a pattern shared by two mappings would break this, and none is
            let mut matches = BTreeMap::new();
            for m in &mappings {
                let hit = c.iter().any(|x| m.criteria_group.contains(x));
                for p in &m.pattern_group {
                    matches.insert(p.clone(), if hit { vec![row()] } else { Vec::new() });
                }
            }
            reports.push(PatternReport { diagram_id: id, matches });
        }
        for r in evaluate_corpus(&reports, &set, &mappings) {
            if r.total_criteria > 0 {
                prop_assert_eq!(r.precision.unwrap().to_string(), "1.00");
                prop_assert_eq!(r.recall.unwrap().to_string(), "1.00");
            } else {
                prop_assert_eq!(r.detected, 0);
            }
        }
    }
}
