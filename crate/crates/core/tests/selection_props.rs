use ndarray::Array2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sortad::selection::{select_transformations, selection_rows, tscore, SelectionConfig};
use sortad::transform::TransformationSpec;

fn naive_tscore(out: &[Vec<f64>], prev: &[Vec<f64>], beta: f64) -> f64 {
    let d = out[0].len();
    let center: Vec<f64> = (0..d).map(|j| out.iter().map(|r| r[j]).sum::<f64>() / out.len() as f64).collect();
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>();
    let mut outer = 0.0;
    let mut inner = 0.0;
    for r in out {
        let mut best = f64::INFINITY;
        for c in prev {
            best = best.min(dist(r, c));
        }
        outer += best;
        inner += dist(r, &center);
    }
    (1.0 - beta) * outer - beta * inner
}

fn data(rows: &[Vec<f64>]) -> Array2<f64> {
    Array2::from_shape_fn((rows.len(), rows[0].len()), |(i, j)| rows[i][j])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn chosen_candidate_maximizes_tscore(
        rows in proptest::collection::vec(proptest::collection::vec(-2.0f64..2.0, 4), 10..40),
        seed in any::<u64>(),
        beta in 0.0f64..=1.0,
    ) {
        let xs = data(&rows);
        let cfg = SelectionConfig { num_transformations: 3, num_candidates: 5, beta, max_rows: 25, ..Default::default() };
        let (bank, rounds) = select_transformations(xs.view(), &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();

        // Replay the same random stream and re-score every candidate independently.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sel = selection_rows(xs.view(), cfg.max_rows, &mut rng);
        let sel_rows: Vec<Vec<f64>> = sel.rows().into_iter().map(|r| r.to_vec()).collect();
        let mut prev = vec![(0..4).map(|j| sel_rows.iter().map(|r| r[j]).sum::<f64>() / sel_rows.len() as f64).collect::<Vec<_>>()];
        for (round, record) in rounds.iter().enumerate() {
            let candidates: Vec<TransformationSpec> = (0..cfg.num_candidates)
                .map(|_| TransformationSpec::generate(&mut rng, round, 4, &cfg.gen).unwrap())
                .collect();
            let mut best: Option<(usize, f64)> = None;
            let mut outputs = Vec::new();
            for (i, c) in candidates.iter().enumerate() {
                let out: Option<Vec<Vec<f64>>> = sel_rows.iter().map(|r| c.forward(r).ok()).collect();
                if let Some(out) = &out {
                    let s = naive_tscore(out, &prev, beta);
                    prop_assert!((s - record.scores[i].unwrap()).abs() <= 1e-9 * s.abs().max(1.0));
                    if best.is_none_or(|(_, b)| s > b) {
                        best = Some((i, s));
                    }
                }
                outputs.push(out);
            }
            let (winner, _) = best.unwrap();
            prop_assert_eq!(winner, record.chosen);
            prop_assert_eq!(&candidates[winner], &bank.specs[round]);
            let out = outputs[winner].as_ref().unwrap();
            prev.push((0..4).map(|j| out.iter().map(|r| r[j]).sum::<f64>() / out.len() as f64).collect());
        }
    }

    #[test]
    fn tscore_translation_invariant(
        rows in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 3), 2..20),
        prev in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 3), 1..4),
        shift in proptest::collection::vec(-10.0f64..10.0, 3),
        beta in 0.0f64..=1.0,
    ) {
        let xs = data(&rows);
        let center: Vec<f64> = (0..3).map(|j| xs.column(j).mean().unwrap()).collect();
        let base = tscore(xs.view(), &center, &prev, beta).unwrap();
        let moved = Array2::from_shape_fn(xs.dim(), |(i, j)| xs[[i, j]] + shift[j]);
        let moved_center: Vec<f64> = center.iter().zip(&shift).map(|(c, s)| c + s).collect();
        let moved_prev: Vec<Vec<f64>> = prev.iter().map(|p| p.iter().zip(&shift).map(|(c, s)| c + s).collect()).collect();
        let after = tscore(moved.view(), &moved_center, &moved_prev, beta).unwrap();
        prop_assert!((base - after).abs() <= 1e-9 * base.abs().max(1.0));
    }
}
