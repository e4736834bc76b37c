//! End-to-end detector: scale, pad, select transformations, train the
//! classifier, fit the Dirichlet model, then score.

use ndarray::{Array2, Array3, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{self, ClassifierModel, TrainConfig, TrainReport};
use crate::data::{pad_even, RobustScaler};
use crate::error::{Error, Result};
use crate::scoring::{
    DirichletFit, DirichletModel, ScoreReport, ScoringMethod, DEFAULT_EPSILON, DEFAULT_R,
};
use crate::selection::{self, SelectionConfig, SelectionRound, TransformBank, DEFAULT_BETA, DEFAULT_SUBSAMPLE};
use crate::transform::GenParams;

/// Score given to samples that overflow under some transformation.
pub const OVERFLOW_SCORE: f64 = f64::MIN;

/// Every hyperparameter of one fitted detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SortadConfig {
    pub num_transformations: usize,
    pub num_temp_transformations: usize,
    pub beta: f64,
    pub max_degree: u32,
    pub chain_length: usize,
    pub divide_factor: i32,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub scoring_method: ScoringMethod,
    pub r: f64,
    pub epsilon: f64,
    pub selection_max_rows: usize,
}

impl Default for SortadConfig {
    fn default() -> Self {
        SortadConfig {
            num_transformations: 10,
            num_temp_transformations: 20,
            beta: DEFAULT_BETA,
            max_degree: 10,
            chain_length: 2,
            divide_factor: 2,
            epochs: 50,
            batch_size: 256,
            learning_rate: 1e-3,
            seed: 1235,
            scoring_method: ScoringMethod::Modified,
            r: DEFAULT_R,
            epsilon: DEFAULT_EPSILON,
            selection_max_rows: DEFAULT_SUBSAMPLE,
        }
    }
}

impl SortadConfig {
    pub fn selection(&self) -> SelectionConfig {
        SelectionConfig {
            num_transformations: self.num_transformations,
            num_candidates: self.num_temp_transformations,
            beta: self.beta,
            gen: GenParams {
                max_degree: self.max_degree,
                chain_length: self.chain_length,
                divide_factor: self.divide_factor,
            },
            max_rows: self.selection_max_rows,
        }
    }

    pub fn training(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.selection().validate()?;
        self.training().validate()?;
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::invalid(format!("r must be positive, got {}", self.r)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::invalid(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SortadModel {
    pub config: SortadConfig,
    pub scaler: RobustScaler,
    pub bank: TransformBank,
    pub classifier: ClassifierModel,
    pub dirichlet: DirichletModel,
}

/// Diagnostics gathered while fitting.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub selection: Vec<SelectionRound>,
    pub training: TrainReport,
    pub dirichlet: Vec<DirichletFit>,
}

impl SortadModel {
    pub fn input_dim(&self) -> usize {
        self.scaler.medians.len()
    }

    pub fn num_transformations(&self) -> usize {
        self.bank.len()
    }

    /// Cross-component shape checks.
    pub fn validate(&self) -> Result<()> {
        let padded = self.input_dim() + self.input_dim() % 2;
        let m = self.bank.len();
        if m == 0 || m != self.bank.centers.len() {
            return Err(Error::InvalidState("transformation bank is empty or inconsistent".into()));
        }
        for spec in &self.bank.specs {
            spec.validate()?;
            if spec.dim() != padded {
                return Err(Error::InvalidState(format!(
                    "transformation dimension {} does not match padded input {padded}",
                    spec.dim()
                )));
            }
        }
        self.classifier.validate()?;
        if self.classifier.input_dim() != padded || self.classifier.num_classes() != m {
            return Err(Error::InvalidState("classifier shape does not match the bank".into()));
        }
        self.dirichlet.validate()?;
        if self.dirichlet.num_transformations() != m {
            return Err(Error::InvalidState("Dirichlet model does not match the bank".into()));
        }
        Ok(())
    }
}

/// Classifier predictions on every transformation of `xs` (already scaled
/// and padded), shaped `samples x M x M`, plus per-sample overflow flags.
pub fn transformed_predictions(
    bank: &TransformBank,
    classifier: &ClassifierModel,
    xs: ArrayView2<f64>,
) -> Result<(Array3<f64>, Vec<bool>)> {
    let m = bank.len();
    let n = xs.nrows();
    let mut preds = Array3::zeros((n, m, m));
    let mut flags = vec![false; n];
    for (t, spec) in bank.specs.iter().enumerate() {
        let (out, bad) = spec.forward_batch_flagged(xs)?;
        let p = classifier.predict_proba(out.view())?;
        preds.index_axis_mut(Axis(1), t).assign(&p);
        for (i, (f, b)) in flags.iter_mut().zip(bad).enumerate() {
            *f |= b || p.row(i).iter().any(|v| !v.is_finite());
        }
    }
    Ok((preds, flags))
}

fn prepare(scaler: &RobustScaler, xs: ArrayView2<f64>) -> Result<Array2<f64>> {
    Ok(pad_even(scaler.transform(xs)?.view()))
}

/// Fit the full detector on an unlabelled training matrix.
pub fn fit(train: ArrayView2<f64>, cfg: &SortadConfig) -> Result<(SortadModel, FitReport)> {
    cfg.validate()?;
    if train.nrows() == 0 || train.ncols() == 0 {
        return Err(Error::invalid("training matrix is empty"));
    }
    if train.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("training matrix has non-finite values".into()));
    }
    let scaler = RobustScaler::fit(train).map_err(|e| e.in_stage("scaling"))?;
    let xs = prepare(&scaler, train)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(2);
    let (bank, rounds) = selection::select_transformations(xs.view(), &cfg.selection(), &mut rng)
        .map_err(|e| e.in_stage("selection"))?;
    for r in &rounds {
        log::info!("selection round {}: candidate {} tscore {:.6e}", r.round, r.chosen, r.chosen_score());
    }

    let (data, labels) = classifier::build_training_set(&bank, xs.view()).map_err(|e| e.in_stage("training"))?;
    let mut net = ClassifierModel::new(xs.ncols(), bank.len(), cfg.seed).map_err(|e| e.in_stage("training"))?;
    let training =
        classifier::train(&mut net, data.view(), &labels, &cfg.training()).map_err(|e| e.in_stage("training"))?;
    log::info!("final training loss {:.6}", training.final_loss());

    let (preds, flags) = transformed_predictions(&bank, &net, xs.view()).map_err(|e| e.in_stage("dirichlet"))?;
    if flags.iter().any(|&f| f) {
        return Err(Error::InvalidState("training rows overflowed after selection".into()).in_stage("dirichlet"));
    }
    let (dirichlet, fits) =
        DirichletModel::fit(preds.view(), cfg.r, cfg.epsilon).map_err(|e| e.in_stage("dirichlet"))?;
    for (t, f) in fits.iter().enumerate() {
        if !f.converged {
            log::warn!("Dirichlet fit for transformation {t} fell back to the moment estimate");
        }
    }

    let model = SortadModel {
        config: *cfg,
        scaler,
        bank,
        classifier: net,
        dirichlet,
    };
    Ok((
        model,
        FitReport {
            selection: rounds,
            training,
            dirichlet: fits,
        },
    ))
}

/// Score raw (unscaled) samples under all three methods.
pub fn score(model: &SortadModel, xs: ArrayView2<f64>, method: ScoringMethod) -> Result<ScoreReport> {
    model.validate()?;
    if xs.ncols() != model.input_dim() {
        return Err(Error::Data(format!(
            "model expects {} features, got {}",
            model.input_dim(),
            xs.ncols()
        )));
    }
    let prepared = prepare(&model.scaler, xs)?;
    let (preds, flags) = transformed_predictions(&model.bank, &model.classifier, prepared.view())
        .map_err(|e| e.in_stage("scoring"))?;
    score_predictions(&model.dirichlet, preds.view(), flags, method)
}

/// Score precomputed `samples x M x M` predictions. Flagged samples get
/// [`OVERFLOW_SCORE`] under every method.
pub fn score_predictions(
    dirichlet: &DirichletModel,
    preds: ndarray::ArrayView3<f64>,
    flags: Vec<bool>,
    method: ScoringMethod,
) -> Result<ScoreReport> {
    let rows: Vec<[f64; 3]> = preds
        .axis_iter(Axis(0))
        .into_par_iter()
        .zip(flags.par_iter())
        .map(|(p, &bad)| {
            if bad {
                return Ok([OVERFLOW_SCORE; 3]);
            }
            Ok([
                dirichlet.score(ScoringMethod::Summation, p)?,
                dirichlet.score(ScoringMethod::Dirichlet, p)?,
                dirichlet.score(ScoringMethod::Modified, p)?,
            ])
        })
        .collect::<Result<_>>()?;
    Ok(ScoreReport {
        method,
        summation: rows.iter().map(|r| r[0]).collect(),
        dirichlet: rows.iter().map(|r| r[1]).collect(),
        modified: rows.iter().map(|r| r[2]).collect(),
        overflow: flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    fn small_cfg() -> SortadConfig {
        SortadConfig {
            num_transformations: 3,
            num_temp_transformations: 4,
            epochs: 2,
            ..SortadConfig::default()
        }
    }

    #[test]
    fn fit_and_score_toy() {
        let ds = synth::gaussian_with_outliers(300, 5, 0.05, 7);
        let (model, report) = fit(ds.features.view(), &small_cfg()).unwrap();
        model.validate().unwrap();
        assert_eq!(report.selection.len(), 3);
        assert_eq!(model.classifier.input_dim(), 6);
        let scores = score(&model, ds.features.view(), ScoringMethod::Modified).unwrap();
        assert_eq!(scores.len(), 300);
        assert!(scores.selected().iter().all(|s| s.is_finite()));
    }

    #[test]
    fn deterministic_fit() {
        let ds = synth::gaussian_with_outliers(200, 4, 0.05, 3);
        let (a, _) = fit(ds.features.view(), &small_cfg()).unwrap();
        let (b, _) = fit(ds.features.view(), &small_cfg()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn wrong_width_is_data_error() {
        let ds = synth::gaussian_with_outliers(100, 4, 0.05, 3);
        let (model, _) = fit(ds.features.view(), &small_cfg()).unwrap();
        let err = score(&model, Array2::zeros((2, 3)).view(), ScoringMethod::Modified).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn extreme_input_gets_minimum_score() {
        let ds = synth::gaussian_with_outliers(200, 4, 0.0, 5);
        let (model, _) = fit(ds.features.view(), &small_cfg()).unwrap();
        let mut xs = ds.features.slice(ndarray::s![0..2, ..]).to_owned();
        xs.row_mut(1).fill(1e300);
        let r = score(&model, xs.view(), ScoringMethod::Modified).unwrap();
        assert_eq!(r.overflow, vec![false, true]);
        assert_eq!(r.modified[1], OVERFLOW_SCORE);
        assert!(r.modified[0] > OVERFLOW_SCORE);
    }

    #[test]
    fn mock_identities() {
        let m = 3;
        let perfect = Array3::from_shape_fn((4, m, m), |(_, t, k)| f64::from(u8::from(t == k)));
        let uniform_alpha = DirichletModel {
            alphas: vec![vec![1.0; m]; m],
            train_means: vec![0.0; m],
            r: DEFAULT_R,
            epsilon: DEFAULT_EPSILON,
        };
        let r = score_predictions(&uniform_alpha, perfect.view(), vec![false; 4], ScoringMethod::Summation).unwrap();
        assert!(r.summation.iter().all(|&s| s == m as f64));
        assert!(r.dirichlet.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = SortadConfig {
            beta: 1.5,
            ..SortadConfig::default()
        };
        assert!(matches!(fit(Array2::ones((4, 2)).view(), &cfg), Err(Error::InvalidArgument(_))));
    }
}
