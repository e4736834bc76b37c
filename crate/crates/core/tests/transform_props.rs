use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sortad::transform::{GenParams, TransformationSpec};

fn params() -> GenParams {
    GenParams {
        max_degree: 10,
        chain_length: 2,
        divide_factor: 2,
    }
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn round_trip_on_cube(seed in any::<u64>(), half in 1usize..=16) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = TransformationSpec::generate(&mut rng, 0, 2 * half, &params()).unwrap();
        for _ in 0..1000 {
            let x: Vec<f64> = (0..2 * half).map(|_| rng.random_range(-3.0..=3.0)).collect();
            let y = spec.forward(&x).unwrap();
            let back = spec.invert(&y).unwrap();
            let e = rel_err(&back, &x);
            prop_assert!(e <= 1e-8, "relative error {e:e} for x = {x:?}");
        }
    }

    #[test]
    fn forward_moves_some_coordinate(seed in any::<u64>(), half in 1usize..=16) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = TransformationSpec::generate(&mut rng, 0, 2 * half, &params()).unwrap();
        let x: Vec<f64> = (0..2 * half).map(|_| rng.random_range(-3.0..=3.0)).collect();
        let y = spec.forward(&x).unwrap();
        prop_assert!(x.iter().zip(&y).any(|(a, b)| a != b));
    }
}
