//! Grid-and-seed experiment protocol: fit on train, learn thresholds on a
//! reference split, evaluate, pick the best grid point on validation, and
//! aggregate across seeds.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::evaluation::{mean_std, EvalReport};
use crate::pipeline::{self, SortadConfig, SortadModel};
use crate::scoring::{ScoreReport, ScoringMethod};

pub const DEFAULT_SEEDS: [u64; 3] = [1235, 7234, 3553];

/// Where per-threshold cut-offs are learned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdSource {
    #[default]
    Train,
    Validation,
}

#[derive(Debug, Clone)]
pub struct Splits {
    pub train: Dataset,
    pub validation: Option<Dataset>,
    pub test: Dataset,
}

/// The default hyperparameter grid: `M` in {5, 10, 15, 22} by epochs in {1, 50}.
pub fn default_grid(base: &SortadConfig) -> Vec<SortadConfig> {
    let mut grid = Vec::new();
    for m in [5, 10, 15, 22] {
        for epochs in [1, 50] {
            grid.push(SortadConfig {
                num_transformations: m,
                epochs,
                ..*base
            });
        }
    }
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub config: SortadConfig,
    pub validation: Option<EvalReport>,
    pub test: EvalReport,
}

/// Scores of one fitted model on every split.
pub struct ScoredRun {
    pub model: SortadModel,
    pub train: ScoreReport,
    pub validation: Option<ScoreReport>,
    pub test: ScoreReport,
}

pub fn fit_and_score(cfg: &SortadConfig, splits: &Splits) -> Result<ScoredRun> {
    let (model, _) = pipeline::fit(splits.train.features.view(), cfg)?;
    let method = cfg.scoring_method;
    let train = pipeline::score(&model, splits.train.features.view(), method)?;
    let validation = splits
        .validation
        .as_ref()
        .map(|v| pipeline::score(&model, v.features.view(), method))
        .transpose()?;
    let test = pipeline::score(&model, splits.test.features.view(), method)?;
    Ok(ScoredRun {
        model,
        train,
        validation,
        test,
    })
}

/// Evaluate a scored run under `method`.
pub fn evaluate_run(
    run: &ScoredRun,
    splits: &Splits,
    method: ScoringMethod,
    thresholds: &[f64],
    source: ThresholdSource,
) -> Result<RunResult> {
    let reference = match source {
        ThresholdSource::Train => run.train.scores(method),
        ThresholdSource::Validation => run
            .validation
            .as_ref()
            .ok_or_else(|| Error::invalid("thresholds from validation need a validation split"))?
            .scores(method),
    };
    let validation = match (&run.validation, &splits.validation) {
        (Some(scores), Some(ds)) => Some(EvalReport::compute(
            reference,
            scores.scores(method),
            ds.labels_or_err()?,
            thresholds,
        )?),
        _ => None,
    };
    let test = EvalReport::compute(
        reference,
        run.test.scores(method),
        splits.test.labels_or_err()?,
        thresholds,
    )?;
    Ok(RunResult {
        config: SortadConfig {
            scoring_method: method,
            ..run.model.config
        },
        validation,
        test,
    })
}

pub fn run_one(
    cfg: &SortadConfig,
    splits: &Splits,
    thresholds: &[f64],
    source: ThresholdSource,
) -> Result<RunResult> {
    let run = fit_and_score(cfg, splits)?;
    evaluate_run(&run, splits, cfg.scoring_method, thresholds, source)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let (mean, std) = mean_std(values);
        MeanStd { mean, std }
    }
}

/// Test metrics of one grid point across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub config: SortadConfig,
    pub seeds: Vec<u64>,
    pub thresholds: Vec<f64>,
    pub vs_random: Vec<MeanStd>,
    pub roc_auc: MeanStd,
    /// Mean validation `vs_random` at the first threshold, when available.
    pub validation_vs_random: Option<f64>,
}

/// Aggregate runs that share a grid point (differing only in seed).
pub fn aggregate(runs: &[RunResult]) -> Result<Aggregate> {
    let first = runs.first().ok_or_else(|| Error::invalid("nothing to aggregate"))?;
    let thresholds: Vec<f64> = first.test.thresholds.iter().map(|t| t.p).collect();
    let vs_random = (0..thresholds.len())
        .map(|i| {
            let v: Vec<f64> = runs.iter().map(|r| r.test.thresholds[i].metrics.vs_random).collect();
            MeanStd::of(&v)
        })
        .collect();
    let auc: Vec<f64> = runs.iter().map(|r| r.test.roc_auc).collect();
    let validation: Option<Vec<f64>> = runs
        .iter()
        .map(|r| r.validation.as_ref().map(EvalReport::primary_vs_random))
        .collect();
    Ok(Aggregate {
        config: first.config,
        seeds: runs.iter().map(|r| r.config.seed).collect(),
        thresholds,
        vs_random,
        roc_auc: MeanStd::of(&auc),
        validation_vs_random: validation.map(|v| MeanStd::of(&v).mean),
    })
}

/// Index of the grid point with the best mean validation score (first wins ties).
pub fn best_on_validation(aggregates: &[Aggregate]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, a) in aggregates.iter().enumerate() {
        let Some(v) = a.validation_vs_random else { continue };
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Run every grid point for every seed and aggregate per grid point.
pub fn run_grid(
    grid: &[SortadConfig],
    seeds: &[u64],
    splits: &Splits,
    thresholds: &[f64],
    source: ThresholdSource,
) -> Result<Vec<Aggregate>> {
    grid.iter()
        .map(|cfg| {
            let runs = seeds
                .iter()
                .map(|&seed| run_one(&SortadConfig { seed, ..*cfg }, splits, thresholds, source))
                .collect::<Result<Vec<_>>>()?;
            aggregate(&runs)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    NumTransformations,
    NumTempTransformations,
    ScoringMethod,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::NumTransformations => "num_transformations",
            SweepAxis::NumTempTransformations => "num_temp_transformations",
            SweepAxis::ScoringMethod => "scoring_method",
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "num_transformations" => Ok(SweepAxis::NumTransformations),
            "num_temp_transformations" => Ok(SweepAxis::NumTempTransformations),
            "scoring_method" => Ok(SweepAxis::ScoringMethod),
            other => Err(Error::invalid(format!("unknown sweep axis {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: String,
    /// Test `vs_random` at the first threshold across seeds.
    pub vs_random: MeanStd,
    pub roc_auc: MeanStd,
}

/// Vary one axis, everything else fixed at `base`. Values are parsed per axis.
pub fn sweep(
    axis: SweepAxis,
    values: &[String],
    base: &SortadConfig,
    seeds: &[u64],
    splits: &Splits,
    thresholds: &[f64],
    source: ThresholdSource,
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::invalid("sweep needs at least one axis value"));
    }
    let configs = values
        .iter()
        .map(|v| {
            let mut cfg = *base;
            match axis {
                SweepAxis::NumTransformations => cfg.num_transformations = parse_count(v)?,
                SweepAxis::NumTempTransformations => cfg.num_temp_transformations = parse_count(v)?,
                SweepAxis::ScoringMethod => cfg.scoring_method = v.parse()?,
            }
            cfg.validate()?;
            Ok(cfg)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut per_value: Vec<Vec<RunResult>> = vec![Vec::new(); configs.len()];
    for &seed in seeds {
        if axis == SweepAxis::ScoringMethod {
            // The fitted model does not depend on the scoring method.
            let cfg = SortadConfig { seed, ..*base };
            let run = fit_and_score(&cfg, splits)?;
            for (i, c) in configs.iter().enumerate() {
                per_value[i].push(evaluate_run(&run, splits, c.scoring_method, thresholds, source)?);
            }
        } else {
            for (i, c) in configs.iter().enumerate() {
                per_value[i].push(run_one(&SortadConfig { seed, ..*c }, splits, thresholds, source)?);
            }
        }
    }
    values
        .iter()
        .zip(per_value)
        .map(|(v, runs)| {
            let a = aggregate(&runs)?;
            Ok(SweepRow {
                value: v.clone(),
                vs_random: a.vs_random[0],
                roc_auc: a.roc_auc,
            })
        })
        .collect()
}

fn parse_count(v: &str) -> Result<usize> {
    v.trim()
        .parse()
        .map_err(|_| Error::invalid(format!("sweep value {v:?} is not a positive integer")))
}
