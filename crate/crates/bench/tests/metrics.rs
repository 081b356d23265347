use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rfda_bench::{metrics_from_scores, FPR_TARGETS};
use rfda_core::data::Label;

const P: Label = Label::Pos;
const N: Label = Label::Neg;

#[test]
fn ten_sample_sweep_matches_hand_count() {
    let mut pairs = vec![
        (0.9, P),
        (0.8, N),
        (0.7, P),
        (0.6, P),
        (0.5, N),
        (0.4, P),
        (0.3, N),
        (0.2, N),
        (0.1, P),
        (0.05, N),
    ];
    pairs.shuffle(&mut ChaCha8Rng::seed_from_u64(3));
    let (scores, labels): (Vec<f64>, Vec<Label>) = pairs.into_iter().unzip();
    let m = metrics_from_scores(&scores, &labels).unwrap();

    // Reachable FPRs are multiples of 0.2. Targets up to 0.158 land on
    // FPR 0.2 (3 of 5 positives found), the next two on 0.4 (4 of 5),
    // the last two on 0.8 and 1.0 (all found).
    let expected = [0.4, 0.4, 0.4, 0.4, 0.4, 0.4, 0.4, 0.2, 0.2, 0.0, 0.0];
    for (got, want) in m.miss_rates.iter().zip(expected) {
        assert!((got - want).abs() < 1e-12, "{:?}", m.miss_rates);
    }
    assert!((m.avg_miss_rate - 3.2 / 11.0).abs() < 1e-12);
    // positives beat 5 + 4 + 4 + 3 + 1 of the 25 negatives
    assert!((m.auc - 17.0 / 25.0).abs() < 1e-12);
    // 0.8 and 0.5 negatives called positive, 0.4 and 0.1 positives missed
    assert!((m.error_rate - 0.4).abs() < 1e-12);
}

#[test]
fn tie_groups_are_one_operating_point() {
    // every score tied: the only points are nothing and everything
    let labels = [P, N, P, N];
    let m = metrics_from_scores(&[0.3; 4], &labels).unwrap();
    assert!(m.miss_rates[..10].iter().all(|&r| r == 0.0));
    assert_eq!(m.auc, 0.5);

    // a tie straddling the classes cannot be split by any threshold
    let m = metrics_from_scores(&[0.9, 0.5, 0.5, 0.1], &[P, P, N, N]).unwrap();
    assert!((m.miss_rates[0] - 0.0).abs() < 1e-12);
    assert!((m.auc - (1.0 + 0.5 + 1.0 + 1.0) / 4.0).abs() < 1e-12);
}

#[test]
fn length_mismatch_and_nan_are_rejected() {
    assert!(metrics_from_scores(&[0.1], &[P, N]).is_err());
    assert!(metrics_from_scores(&[f64::NAN, 0.1], &[P, N]).is_err());
}

/// Distinct scores for `labels` in a random order.
fn ranked(labels: &[bool], seed: u64) -> Vec<f64> {
    let mut s: Vec<f64> = (0..labels.len())
        .map(|i| i as f64 / labels.len() as f64)
        .collect();
    s.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn fixing_an_inversion_never_raises_a_miss_rate(
        raw in prop::collection::vec(any::<bool>(), 4..40),
        seed in any::<u64>(),
    ) {
        prop_assume!(raw.iter().any(|&b| b) && raw.iter().any(|&b| !b));
        let labels: Vec<Label> = raw.iter().map(|&b| if b { P } else { N }).collect();
        let mut scores = ranked(&raw, seed);
        let mut prev = metrics_from_scores(&scores, &labels).unwrap();
        // each probe swaps one adjacent negative-above-positive pair, so the
        // models form a chain of strictly improving rankings
        loop {
            let mut order: Vec<usize> = (0..scores.len()).collect();
            order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
            let Some(k) = order.windows(2).position(|w| !raw[w[0]] && raw[w[1]]) else {
                break;
            };
            scores.swap(order[k], order[k + 1]);
            let next = metrics_from_scores(&scores, &labels).unwrap();
            prop_assert!(next.auc > prev.auc);
            for (a, b) in next.miss_rates.iter().zip(&prev.miss_rates) {
                prop_assert!(a <= b);
            }
            prop_assert!(next.avg_miss_rate <= prev.avg_miss_rate);
            prev = next;
        }
        prop_assert_eq!(prev.avg_miss_rate, 0.0);
        prop_assert_eq!(prev.auc, 1.0);
    }

    #[test]
    fn report_fields_are_in_range(
        raw in prop::collection::vec((any::<bool>(), 0.0f64..1.0), 2..60),
    ) {
        prop_assume!(raw.iter().any(|p| p.0) && raw.iter().any(|p| !p.0));
        let labels: Vec<Label> = raw.iter().map(|p| if p.0 { P } else { N }).collect();
        let scores: Vec<f64> = raw.iter().map(|p| p.1).collect();
        let m = metrics_from_scores(&scores, &labels).unwrap();
        prop_assert_eq!(m.miss_rates.len(), FPR_TARGETS.len());
        for v in m.miss_rates.iter().chain([&m.avg_miss_rate, &m.auc, &m.error_rate]) {
            prop_assert!((0.0..=1.0).contains(v));
        }
        let mean = m.miss_rates.iter().sum::<f64>() / 11.0;
        prop_assert!((m.avg_miss_rate - mean).abs() < 1e-15);
    }
}
