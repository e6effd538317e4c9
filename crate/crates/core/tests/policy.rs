mod common;

use common::random_policy;
use dnlrl::logic::{neural_conjunction, neural_disjunction};
use dnlrl::policy::{argmax, sample_action, DnlPolicy, SampleMode};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Truths computed directly from the input matrix and the gate functions.
fn reference_truths(policy: &DnlPolicy, raw: &[f64]) -> Vec<f64> {
    let s = policy.process_state(raw).unwrap();
    let m = policy.input_matrix(&[s]).unwrap();
    let row = m.row(0);
    policy
        .networks()
        .iter()
        .map(|net| {
            let terms: Vec<f64> = (0..net.n_terms())
                .map(|j| neural_conjunction(row, &net.conjunction().membership_row(j)).unwrap())
                .collect();
            neural_disjunction(&terms, &net.disjunction().membership_row(0)).unwrap()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn probabilities_normalise_the_floored_truths(seed in 0u64..10_000) {
        let (policy, states) = random_policy(seed);
        for s in &states {
            let out = policy.forward_raw(&[s.as_slice()]).unwrap();
            let truths = out.truths(0);
            let reference = reference_truths(&policy, s);
            let total: f64 = truths.iter().map(|x| x + 1e-6).sum();
            let mut sum = 0.0;
            for (a, &p) in out.probs(0).iter().enumerate() {
                prop_assert!((truths[a] - reference[a]).abs() < 1e-12);
                prop_assert!((p - (truths[a] + 1e-6) / total).abs() < 1e-12);
                prop_assert!(p > 0.0);
                sum += p;
            }
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn batch_rows_match_single_evaluations(seed in 0u64..10_000) {
        let (policy, states) = random_policy(seed);
        let raw: Vec<&[f64]> = states.iter().map(|s| s.as_slice()).collect();
        let batch = policy.forward_raw(&raw).unwrap();
        for (i, s) in raw.iter().enumerate() {
            let single = policy.forward_raw(&[*s]).unwrap();
            prop_assert_eq!(single.probs(0), batch.probs(i));
            prop_assert_eq!(single.truths(0), batch.truths(i));
        }
    }

    #[test]
    fn params_round_trip(seed in 0u64..10_000) {
        let (policy, states) = random_policy(seed);
        let raw: Vec<&[f64]> = states.iter().map(|s| s.as_slice()).collect();
        let mut other = policy.clone();
        let shifted: Vec<f64> = policy.params().iter().map(|p| p + 0.25).collect();
        other.set_params(&shifted).unwrap();
        let base = policy.forward_raw(&raw).unwrap();
        let moved = other.forward_raw(&raw).unwrap();
        prop_assert_ne!(moved.all_truths(), base.all_truths());
        other.set_params(&policy.params()).unwrap();
        prop_assert_eq!(other.params(), policy.params());
        let restored = other.forward_raw(&raw).unwrap();
        prop_assert_eq!(restored.all_probs(), base.all_probs());
    }
}

#[test]
fn set_params_rejects_wrong_length() {
    let (mut policy, _) = random_policy(3);
    let mut p = policy.params();
    p.push(0.0);
    assert!(policy.set_params(&p).is_err());
}

#[test]
fn wrong_state_width_is_an_error() {
    let (policy, states) = random_policy(4);
    let mut s = states[0].clone();
    s.push(0.0);
    assert!(policy.action_probs(&s).is_err());
    s.truncate(s.len() - 2);
    assert!(policy.action_probs(&s).is_err());
}

#[test]
fn greedy_breaks_ties_toward_the_lowest_index() {
    assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
    assert_eq!(argmax(&[0.5, 0.5]), 0);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert_eq!(sample_action(&[0.3, 0.3, 0.3], SampleMode::Greedy, &mut rng), 0);
}

#[test]
fn stochastic_sampling_matches_the_distribution() {
    let probs = [0.1, 0.2, 0.3, 0.4];
    let n = 200_000;
    let mut counts = [0usize; 4];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..n {
        counts[sample_action(&probs, SampleMode::Stochastic, &mut rng)] += 1;
    }
    let chi2: f64 = counts
        .iter()
        .zip(probs)
        .map(|(&c, p)| {
            let e = p * n as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    // 3 degrees of freedom, p = 0.001
    assert!(chi2 < 16.27, "chi2 {chi2}");
}
