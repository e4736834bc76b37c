//! Transformation classifier: a small dense network trained to tell which
//! transformation produced a sample.
//!
//! Hidden layers use ReLU, the output layer softmax. Training minimizes mean
//! cross-entropy with Adam over shuffled mini-batches; everything is seeded.

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::selection::TransformBank;

/// Hidden layer widths.
pub const HIDDEN_LAYERS: [usize; 2] = [64, 16];

/// Rows per chunk in [`ClassifierModel::predict_proba`].
const PREDICT_CHUNK: usize = 2048;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `fan_in x fan_out`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub layers: Vec<Dense>,
}

/// Gradients with the same shapes as the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 256,
            learning_rate: 1e-3,
            seed: 1235,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if self.batch_size < 1 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean training loss of each epoch.
    pub epoch_losses: Vec<f64>,
    /// Number of optimizer steps taken.
    pub updates: usize,
}

impl TrainReport {
    pub fn final_loss(&self) -> f64 {
        *self.epoch_losses.last().unwrap_or(&f64::NAN)
    }
}

fn relu(mut a: Array2<f64>) -> Array2<f64> {
    // Written so NaN propagates instead of being clipped to zero.
    a.mapv_inplace(|v| if v < 0.0 { 0.0 } else { v });
    a
}

/// Row-wise log-softmax, stabilized by subtracting each row's max.
fn log_softmax(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| v - max);
        let lse = row.iter().map(|v| v.exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }
    out
}

impl ClassifierModel {
    /// Network `input_dim -> 64 -> 16 -> num_classes` with Glorot-uniform
    /// weights drawn from `seed`.
    pub fn new(input_dim: usize, num_classes: usize, seed: u64) -> Result<Self> {
        let mut dims = vec![input_dim];
        dims.extend(HIDDEN_LAYERS);
        dims.push(num_classes);
        Self::with_dims(&dims, seed)
    }

    pub fn with_dims(dims: &[usize], seed: u64) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::invalid(format!("invalid layer dimensions {dims:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = dims
            .windows(2)
            .map(|w| {
                let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
                let weights = Array2::from_shape_simple_fn((w[0], w[1]), || {
                    rng.random_range(-limit..limit)
                });
                Dense {
                    weights,
                    bias: Array1::zeros(w[1]),
                }
            })
            .collect();
        Ok(ClassifierModel { layers })
    }

    /// All-zero weights; its softmax output is uniform.
    pub fn zeros(dims: &[usize]) -> Self {
        let layers = dims
            .windows(2)
            .map(|w| Dense {
                weights: Array2::zeros((w[0], w[1])),
                bias: Array1::zeros(w[1]),
            })
            .collect();
        ClassifierModel { layers }
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers.iter().map(|l| l.bias.len()));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.weights.nrows())
    }

    pub fn num_classes(&self) -> usize {
        self.layers.last().map_or(0, |l| l.bias.len())
    }

    /// Shape consistency between consecutive layers.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::invalid("classifier has no layers"));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.weights.ncols() != l.bias.len() {
                return Err(Error::invalid(format!("layer {i}: bias length mismatch")));
            }
            if i > 0 && self.layers[i - 1].bias.len() != l.weights.nrows() {
                return Err(Error::invalid(format!("layer {i}: input width mismatch")));
            }
        }
        Ok(())
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.input_dim() {
            return Err(Error::invalid(format!(
                "classifier expects {} columns, got {cols}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Activations of every layer (post-ReLU for hidden, raw logits last).
    fn activations(&self, xs: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let mut acts: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let input = if i == 0 { xs } else { acts[i - 1].view() };
            let z = input.dot(&layer.weights) + &layer.bias;
            acts.push(if i == last { z } else { relu(z) });
        }
        acts
    }

    fn logits(&self, xs: ArrayView2<f64>) -> Array2<f64> {
        self.activations(xs).pop().expect("at least one layer")
    }

    /// Softmax probabilities, one row per input row.
    pub fn predict_proba(&self, xs: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(xs.ncols())?;
        let chunks: Vec<Array2<f64>> = xs
            .axis_chunks_iter(Axis(0), PREDICT_CHUNK)
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|chunk| log_softmax(&self.logits(chunk)).mapv(f64::exp))
            .collect();
        if chunks.is_empty() {
            return Ok(Array2::zeros((0, self.num_classes())));
        }
        let views: Vec<_> = chunks.iter().map(|c| c.view()).collect();
        Ok(concatenate(Axis(0), &views).expect("chunks share column count"))
    }

    /// Mean cross-entropy of `batch` against `labels` and its exact gradient.
    pub fn loss_and_gradients(
        &self,
        batch: ArrayView2<f64>,
        labels: &[usize],
    ) -> Result<(f64, Gradients)> {
        self.check_input(batch.ncols())?;
        let n = batch.nrows();
        if n == 0 || labels.len() != n {
            return Err(Error::invalid("batch must be non-empty with one label per row"));
        }
        let classes = self.num_classes();
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::invalid(format!("label {bad} outside [0, {classes})")));
        }
        let acts = self.activations(batch);
        let logp = log_softmax(acts.last().expect("logits"));
        let loss = -labels
            .iter()
            .enumerate()
            .map(|(i, &y)| logp[[i, y]])
            .sum::<f64>()
            / n as f64;

        // d loss / d logits = (softmax - onehot) / n
        let mut delta = logp.mapv(f64::exp);
        for (i, &y) in labels.iter().enumerate() {
            delta[[i, y]] -= 1.0;
        }
        delta /= n as f64;

        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let input = if i == 0 { batch } else { acts[i - 1].view() };
            let gw = input.t().dot(&delta);
            let gb = delta.sum_axis(Axis(0));
            if i > 0 {
                let mut back = delta.dot(&self.layers[i].weights.t());
                Zip::from(&mut back)
                    .and(&acts[i - 1])
                    .for_each(|d, &a| {
                        if a <= 0.0 {
                            *d = 0.0;
                        }
                    });
                delta = back;
            }
            grads.push(Dense {
                weights: gw,
                bias: gb,
            });
        }
        grads.reverse();
        Ok((loss, Gradients { layers: grads }))
    }
}

struct Adam {
    m: Vec<Dense>,
    v: Vec<Dense>,
    step: i32,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(model: &ClassifierModel, lr: f64) -> Self {
        let zeros = |l: &Dense| Dense {
            weights: Array2::zeros(l.weights.raw_dim()),
            bias: Array1::zeros(l.bias.raw_dim()),
        };
        Adam {
            m: model.layers.iter().map(zeros).collect(),
            v: model.layers.iter().map(zeros).collect(),
            step: 0,
            lr,
        }
    }

    fn update(&mut self, model: &mut ClassifierModel, grads: &Gradients) {
        self.step += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.step);
        let c2 = 1.0 - Self::BETA2.powi(self.step);
        let lr = self.lr;
        let apply = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        };
        for (((layer, g), m), v) in model
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            Zip::from(&mut layer.weights)
                .and(&mut m.weights)
                .and(&mut v.weights)
                .and(&g.weights)
                .for_each(|p, m, v, &g| apply(p, m, v, g));
            Zip::from(&mut layer.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .and(&g.bias)
                .for_each(|p, m, v, &g| apply(p, m, v, g));
        }
    }
}

/// Train `model` in place with mini-batch Adam.
pub fn train(
    model: &mut ClassifierModel,
    data: ArrayView2<f64>,
    labels: &[usize],
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    model.validate()?;
    if data.nrows() != labels.len() {
        return Err(Error::invalid("data rows and label count differ"));
    }
    if data.nrows() == 0 {
        return Err(Error::invalid("cannot train on an empty set"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut adam = Adam::new(model, cfg.learning_rate);
    let mut order: Vec<usize> = (0..data.nrows()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut updates = 0;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let batch = data.select(Axis(0), idx);
            let batch_labels: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
            let (loss, grads) = model.loss_and_gradients(batch.view(), &batch_labels)?;
            if !loss.is_finite() {
                return Err(Error::TrainingDivergence {
                    epoch,
                    batch: b,
                    loss,
                });
            }
            total += loss * idx.len() as f64;
            adam.update(model, &grads);
            updates += 1;
        }
        let mean = total / data.nrows() as f64;
        log::debug!("epoch {epoch}: loss {mean:.6}");
        epoch_losses.push(mean);
    }
    Ok(TrainReport {
        epoch_losses,
        updates,
    })
}

/// Stack every transformation's output on `train`, labelled by transformation index.
pub fn build_training_set(
    bank: &TransformBank,
    train: ArrayView2<f64>,
) -> Result<(Array2<f64>, Vec<usize>)> {
    if bank.is_empty() {
        return Err(Error::invalid("transformation bank is empty"));
    }
    let n = train.nrows();
    let mut out = Array2::zeros((n * bank.len(), train.ncols()));
    let mut labels = Vec::with_capacity(n * bank.len());
    for (m, spec) in bank.specs.iter().enumerate() {
        let t = spec.forward_batch(train)?;
        out.slice_mut(s![m * n..(m + 1) * n, ..]).assign(&t);
        labels.extend(std::iter::repeat_n(m, n));
    }
    Ok((out, labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_model_is_uniform() {
        let model = ClassifierModel::zeros(&[3, 4, 5]);
        let p = model.predict_proba(array![[1.0, -2.0, 3.0], [0.0, 0.0, 0.0]].view()).unwrap();
        for v in p.iter() {
            assert!((v - 0.2).abs() < 1e-15);
        }
        let (loss, _) = model.loss_and_gradients(array![[1.0, 2.0, 3.0]].view(), &[2]).unwrap();
        assert!((loss - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn default_architecture() {
        let model = ClassifierModel::new(6, 5, 1).unwrap();
        assert_eq!(model.layer_dims(), vec![6, 64, 16, 5]);
        model.validate().unwrap();
    }

    #[test]
    fn rows_sum_to_one() {
        let model = ClassifierModel::new(4, 7, 9).unwrap();
        let xs = Array2::from_shape_fn((50, 4), |(i, j)| ((i * 7 + j * 3) as f64).sin() * 4.0);
        let p = model.predict_proba(xs.view()).unwrap();
        for row in p.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }

    #[test]
    fn predict_dimension_mismatch() {
        let model = ClassifierModel::new(4, 3, 0).unwrap();
        assert!(matches!(
            model.predict_proba(Array2::zeros((2, 5)).view()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn duplicated_rows_same_loss() {
        let model = ClassifierModel::new(2, 3, 4).unwrap();
        let once = array![[0.5, -1.0], [2.0, 0.3]];
        let twice = array![[0.5, -1.0], [2.0, 0.3], [0.5, -1.0], [2.0, 0.3]];
        let (a, _) = model.loss_and_gradients(once.view(), &[0, 2]).unwrap();
        let (b, _) = model.loss_and_gradients(twice.view(), &[0, 2, 0, 2]).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn one_epoch_update_count() {
        let mut model = ClassifierModel::new(2, 2, 1).unwrap();
        let xs = Array2::from_shape_fn((1000, 2), |(i, j)| (i + j) as f64 / 1000.0);
        let labels: Vec<usize> = (0..1000).map(|i| i % 2).collect();
        let cfg = TrainConfig {
            epochs: 1,
            batch_size: 256,
            ..TrainConfig::default()
        };
        let report = train(&mut model, xs.view(), &labels, &cfg).unwrap();
        assert_eq!(report.updates, 4);
        assert_eq!(report.epoch_losses.len(), 1);
    }

    #[test]
    fn rejects_bad_config() {
        let mut model = ClassifierModel::new(2, 2, 1).unwrap();
        let xs = Array2::zeros((2, 2));
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(train(&mut model, xs.view(), &[0, 1], &cfg).is_err());
        let cfg = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert!(train(&mut model, xs.view(), &[0, 1], &cfg).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let mut model = ClassifierModel::new(2, 2, 1).unwrap();
        let xs = array![[f64::NAN, 0.0], [1.0, 1.0]];
        let cfg = TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        };
        let r = train(&mut model, xs.view(), &[0, 1], &cfg);
        assert!(matches!(r, Err(Error::TrainingDivergence { epoch: 0, batch: 0, .. })), "{r:?}");
    }
}
