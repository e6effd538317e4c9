mod common;

use common::{fit_concept, random_policy};
use dnlrl::logic::{DnlNetwork, MembershipWeights};
use dnlrl::policy::{DnlPolicy, PolicyConfig};
use dnlrl::predicates::{ColumnKind, Feature, FeatureSchema, TransformKb};
use dnlrl::rules::{
    crisp_evaluate, extract_policy, format_policy, read_rules_jsonl, write_rules_jsonl, Comparison, RewardSummary,
};
use proptest::prelude::*;

const C: f64 = 6.0;

/// Raw weight whose membership is `m` (inverse of the squeezed sigmoid, ignoring ε).
fn raw_for(m: f64) -> f64 {
    (m / (1.0 - m)).ln() / C
}

/// CartPos with 4 bins on [-4.8, 4.8]; columns are gt0 lt0 gt1 lt1 gt2 lt2 gt3 lt3.
fn hand_policy(left_conj: &[(usize, f64)], left_disj: f64) -> DnlPolicy {
    let schema = FeatureSchema::new(vec![Feature::continuous("CartPos", -4.8, 4.8, 4)]).unwrap();
    let mut policy = DnlPolicy::new(
        schema,
        TransformKb::empty(),
        vec!["left".into(), "right".into()],
        &PolicyConfig {
            n_terms: 1,
            ..Default::default()
        },
        0,
    )
    .unwrap();
    let mut conj = vec![-5.0; 8];
    for &(col, m) in left_conj {
        conj[col] = raw_for(m);
    }
    policy.networks_mut()[0] = DnlNetwork::new(
        MembershipWeights::new(1, 8, conj, C).unwrap(),
        MembershipWeights::new(1, 1, vec![raw_for(left_disj)], C).unwrap(),
    )
    .unwrap();
    policy.networks_mut()[1] = DnlNetwork::new(
        MembershipWeights::new(1, 8, vec![-5.0; 8], C).unwrap(),
        MembershipWeights::new(1, 1, vec![-5.0], C).unwrap(),
    )
    .unwrap();
    policy
}

#[test]
fn hand_built_rule_renders_and_evaluates() {
    let policy = hand_policy(&[(2, 0.97), (5, 0.81)], 0.99);
    let rules = extract_policy(&policy, 0.5, 0.95).unwrap();
    assert_eq!(rules.len(), 1);
    let r = &rules[0];
    assert_eq!(r.action, "left");
    assert!(r.confident);
    assert_eq!(r.atoms.len(), 2);
    assert_eq!(r.atoms[0].comparison, Comparison::Greater(-2.4));
    assert!((r.atoms[1].membership - 0.81).abs() < 1e-9);
    let stats = RewardSummary {
        mean: 290.3,
        std: 32.3,
        episodes: 100,
    };
    let text = format_policy("dNLRLc", policy.actions(), &rules, Some(stats));
    assert!(text.contains("mean reward: 290.3 ± 32.3"), "{text}");
    assert!(text.contains("left() :- (CartPos>-2.40 ∧ [0.81]CartPos<2.40)"), "{text}");
    assert!(text.contains("right() :- ⊥"), "{text}");

    let inside = policy.process_state(&[0.0]).unwrap();
    let outside = policy.process_state(&[3.0]).unwrap();
    assert_eq!(crisp_evaluate(&rules, 2, &inside), vec![1.0, 0.0]);
    assert_eq!(crisp_evaluate(&rules, 2, &outside), vec![0.0, 0.0]);
    assert_eq!(crisp_evaluate(&[], 2, &inside), vec![0.0, 0.0]);
}

#[test]
fn weighted_disjunct_and_two_rule_blocks() {
    let mut policy = hand_policy(&[(6, 0.99)], 0.7);
    // a second term for left
    let net = &policy.networks()[0];
    let mut conj = net.conjunction().raw().to_vec();
    conj.extend(std::iter::repeat_n(-5.0, 8));
    conj[8 + 1] = raw_for(0.99);
    policy.networks_mut()[0] = DnlNetwork::new(
        MembershipWeights::new(2, 8, conj, C).unwrap(),
        MembershipWeights::new(1, 2, vec![raw_for(0.7), raw_for(0.99)], C).unwrap(),
    )
    .unwrap();
    let rules = extract_policy(&policy, 0.5, 0.95).unwrap();
    let text = format_policy("", policy.actions(), &rules, None);
    let left_lines: Vec<&str> = text.lines().filter(|l| l.starts_with("left() :-")).collect();
    assert_eq!(left_lines.len(), 2, "{text}");
    assert!(left_lines[0].starts_with("left() :- [0.70] (CartPos>2.40)"), "{text}");
    assert_eq!(left_lines[1], "left() :- (CartPos<-2.40)");
}

#[test]
fn zero_memberships_give_no_rules() {
    let policy = hand_policy(&[], 1e-9);
    assert!(extract_policy(&policy, 0.5, 0.95).unwrap().is_empty());
}

#[test]
fn thresholds_are_validated() {
    let (policy, _) = random_policy(0);
    assert!(extract_policy(&policy, 0.0, 0.95).is_err());
    assert!(extract_policy(&policy, 0.9, 0.8).is_err());
    assert!(extract_policy(&policy, 0.5, 1.5).is_err());
    assert!(extract_policy(&policy, 0.95, 0.95).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn raising_the_keep_threshold_never_adds(seed in 0u64..10_000, k1 in 0.3f64..0.7, dk in 0.0f64..0.25) {
        let (policy, _) = random_policy(seed);
        let count = |keep: f64| {
            let rules = extract_policy(&policy, keep, 0.95).unwrap();
            (rules.len(), rules.iter().map(|r| r.atoms.len()).sum::<usize>())
        };
        let (r1, a1) = count(k1);
        let (r2, a2) = count(k1 + dk);
        prop_assert!(r2 <= r1);
        prop_assert!(a2 <= a1);
    }

    #[test]
    fn extraction_is_read_only_and_atoms_point_at_real_columns(seed in 0u64..10_000) {
        let (policy, _) = random_policy(seed);
        let before = policy.clone();
        let rules = extract_policy(&policy, 0.4, 0.95).unwrap();
        prop_assert_eq!(policy.params(), before.params());
        let labels = policy.labels();
        let blocks = policy.bank().blocks();
        for r in &rules {
            for a in &r.atoms {
                let label = &labels[a.column];
                prop_assert_eq!(&label.name, &a.name);
                match (label.kind, a.comparison) {
                    (ColumnKind::Greater { block, bin }, Comparison::Greater(b)) => prop_assert_eq!(blocks[block].gt[bin], b),
                    (ColumnKind::Less { block, bin }, Comparison::Less(b)) => prop_assert_eq!(blocks[block].lt[bin], b),
                    (ColumnKind::IsTrue { .. }, Comparison::IsTrue) | (ColumnKind::IsFalse { .. }, Comparison::IsFalse) => {}
                    other => prop_assert!(false, "mismatched atom {:?}", other),
                }
            }
        }
    }

    #[test]
    fn jsonl_round_trips(seed in 0u64..10_000) {
        let (policy, _) = random_policy(seed);
        let rules = extract_policy(&policy, 0.3, 0.6).unwrap();
        let mut buf = Vec::new();
        write_rules_jsonl(&rules, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        prop_assert_eq!(text.lines().count(), rules.len());
        prop_assert_eq!(read_rules_jsonl(&text).unwrap(), rules);
    }
}

#[test]
fn concept_rule_is_recovered_from_labelled_samples() {
    let fit = fit_concept(0, 4000, 1500);
    assert!(!fit.rules.is_empty());
    assert!(fit.test_accuracy >= 0.99, "accuracy {}", fit.test_accuracy);
    assert!(fit.grid_agreement >= 0.98, "grid agreement {}", fit.grid_agreement);
}

