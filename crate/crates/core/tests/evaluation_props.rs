use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sortad::evaluation::{evaluate_at_threshold, learn_threshold, roc_auc};

fn pairwise_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (a, &la) in scores.iter().zip(labels) {
        for (n, &ln) in scores.iter().zip(labels) {
            if la == 1 && ln == 0 {
                pairs += 1.0;
                wins += if a < n { 1.0 } else if a == n { 0.5 } else { 0.0 };
            }
        }
    }
    wins / pairs
}

fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    proptest::collection::vec((0i32..30, any::<bool>()), 2..120).prop_filter_map("both classes", |v| {
        let labels: Vec<u8> = v.iter().map(|&(_, l)| u8::from(l)).collect();
        let has_both = labels.contains(&0) && labels.contains(&1);
        has_both.then(|| (v.iter().map(|&(s, _)| f64::from(s) / 3.0).collect(), labels))
    })
}

proptest! {
    #[test]
    fn auc_matches_pairwise_oracle((scores, labels) in scored()) {
        prop_assert!((roc_auc(&scores, &labels).unwrap() - pairwise_auc(&scores, &labels)).abs() <= 1e-12);
    }

    #[test]
    fn auc_invariant_under_monotone_maps((scores, labels) in scored()) {
        let mapped: Vec<f64> = scores.iter().map(|s| (s * 0.7).exp() - 5.0).collect();
        prop_assert_eq!(roc_auc(&scores, &labels).unwrap(), roc_auc(&mapped, &labels).unwrap());
    }

    #[test]
    fn recall_monotone_in_threshold((scores, labels) in scored(), a in 0.0f64..10.0, b in 0.0f64..10.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let r_lo = evaluate_at_threshold(&scores, &labels, lo).unwrap();
        let r_hi = evaluate_at_threshold(&scores, &labels, hi).unwrap();
        prop_assert!(r_lo.non_adjusted_recall <= r_hi.non_adjusted_recall);
        prop_assert!((0.0..=1.0).contains(&r_hi.non_adjusted_recall));
        prop_assert!((0.0..=1.0).contains(&r_hi.actual_alert_fraction));
        prop_assert!(r_hi.vs_random >= 0.0);
    }
}

#[test]
fn random_scorer_is_near_one() {
    // 20 independent trials; each must land within 3 sigma of 1.
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..20 {
        let train: Vec<f64> = (0..10_000).map(|_| rng.random()).collect();
        let test: Vec<f64> = (0..10_000).map(|_| rng.random()).collect();
        let labels: Vec<u8> = (0..10_000).map(|i| u8::from(i % 20 == 0)).collect();
        let t = learn_threshold(&train, 0.03).unwrap();
        let m = evaluate_at_threshold(&test, &labels, t).unwrap();
        let q = m.actual_alert_fraction;
        let sigma = (q * (1.0 - q) / 500.0).sqrt() / q;
        assert!((m.vs_random - 1.0).abs() <= 3.0 * sigma, "{} vs sigma {sigma}", m.vs_random);
    }
}

#[test]
fn perfect_scorer_hits_inverse_fraction() {
    // 3% anomalies that score lowest: at p = 0.03 every alert is a true one.
    let scores: Vec<f64> = (0..1000).map(f64::from).collect();
    let labels: Vec<u8> = (0..1000).map(|i| u8::from(i < 30)).collect();
    let t = learn_threshold(&scores, 0.03).unwrap();
    let m = evaluate_at_threshold(&scores, &labels, t).unwrap();
    assert_eq!(m.flagged, 30);
    assert!((m.vs_random - 1.0 / 0.03).abs() < 1e-9);
}
