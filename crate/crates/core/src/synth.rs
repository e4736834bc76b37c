//! Seeded synthetic data for tests and experiments.

use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::Dataset;

/// Normals lie near a random low-rank linear subspace; anomalies are drawn
/// uniformly inside the normals' bounding box, so they match the marginal
/// ranges but break the correlations. Anomalies are scattered through the rows.
pub fn gaussian_with_outliers(n: usize, dim: usize, anomaly_fraction: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let latent = dim.div_ceil(2).max(1);
    let w = Array2::from_shape_simple_fn((latent, dim), || rng.sample::<f64, _>(StandardNormal));
    let n_anom = (n as f64 * anomaly_fraction).round() as usize;

    let mut features = Array2::zeros((n, dim));
    for mut row in features.rows_mut() {
        let z: Vec<f64> = (0..latent).map(|_| rng.sample(StandardNormal)).collect();
        for (j, v) in row.iter_mut().enumerate() {
            let clean: f64 = z.iter().enumerate().map(|(k, zk)| zk * w[[k, j]]).sum();
            *v = clean + 0.1 * rng.sample::<f64, _>(StandardNormal);
        }
    }
    let lo: Vec<f64> = features.columns().into_iter().map(|c| c.fold(f64::INFINITY, |a, &b| a.min(b))).collect();
    let hi: Vec<f64> = features
        .columns()
        .into_iter()
        .map(|c| c.fold(f64::NEG_INFINITY, |a, &b| a.max(b)))
        .collect();

    let mut labels = vec![0u8; n];
    let mut anomalies = rand::seq::index::sample(&mut rng, n, n_anom).into_vec();
    anomalies.sort_unstable();
    for &i in &anomalies {
        labels[i] = 1;
        for j in 0..dim {
            features[[i, j]] = rng.random_range(lo[j]..=hi[j]);
        }
    }
    Dataset::new(format!("synthetic-{seed}"), features, Some(labels)).expect("synthetic data is finite")
}

/// Classifier outputs shaped `samples x M x M` for an "easy detection"
/// situation: normal samples get near-uniform predictions, anomalies are
/// recognised with correct-class probability of at least 0.99.
pub fn easy_detection_predictions(normals: usize, anomalies: usize, m: usize, seed: u64) -> (Array3<f64>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = normals + anomalies;
    let mut preds = Array3::zeros((n, m, m));
    let labels: Vec<u8> = (0..n).map(|i| u8::from(i >= normals)).collect();
    for (i, &label) in labels.iter().enumerate() {
        for t in 0..m {
            let mut row: Vec<f64> = if label == 1 {
                let correct = rng.random_range(0.991..0.999);
                let rest: Vec<f64> = (0..m - 1).map(|_| rng.random_range(0.5..1.5)).collect();
                let total: f64 = rest.iter().sum();
                let mut it = rest.into_iter().map(|v| v / total * (1.0 - correct));
                (0..m).map(|k| if k == t { correct } else { it.next().unwrap() }).collect()
            } else {
                (0..m).map(|_| rng.random_range(0.9..1.1)).collect()
            };
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= total);
            for (k, v) in row.into_iter().enumerate() {
                preds[[i, t, k]] = v;
            }
        }
    }
    (preds, labels)
}
