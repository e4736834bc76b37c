//! Run configuration: a TOML file, defaults for everything it omits, and
//! command-line overrides applied on top.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sortad::experiment::{SweepAxis, ThresholdSource, DEFAULT_SEEDS};
use sortad::pipeline::SortadConfig;
use sortad::scoring::ScoringMethod;

use crate::failure::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    #[default]
    Stratified,
    Sequential,
}

/// Where the data comes from: one labelled file that is split, or
/// pre-split files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub dataset: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub validation: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub label_col: String,
    pub split_mode: SplitMode,
    /// Train, (validation,) test fractions of `dataset`.
    pub fractions: Vec<f64>,
    pub split_seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            dataset: None,
            train: None,
            validation: None,
            test: None,
            label_col: "label".into(),
            split_mode: SplitMode::Stratified,
            fractions: vec![1.0 / 3.0; 3],
            split_seed: DEFAULT_SEEDS[0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seeds: Vec<u64>,
    pub thresholds: Vec<f64>,
    pub threshold_source: ThresholdSource,
    pub out: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seeds: DEFAULT_SEEDS.to_vec(),
            thresholds: sortad::evaluation::DEFAULT_THRESHOLDS.to_vec(),
            threshold_source: ThresholdSource::Train,
            out: PathBuf::from("sortad-out"),
        }
    }
}

/// Optional value lists; an absent list means "the base model value only".
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Use the standard grid (`M` in {5, 10, 15, 22}, epochs in {1, 50}).
    pub standard: bool,
    pub num_transformations: Option<Vec<usize>>,
    pub num_temp_transformations: Option<Vec<usize>>,
    pub epochs: Option<Vec<usize>>,
    pub beta: Option<Vec<f64>>,
    pub max_degree: Option<Vec<u32>>,
    pub divide_factor: Option<Vec<i32>>,
    pub scoring_method: Option<Vec<ScoringMethod>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: Option<SweepAxis>,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub data: DataConfig,
    pub model: SortadConfig,
    pub grid: GridConfig,
    pub sweep: SweepConfig,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Default)]
pub struct Overrides {
    pub seeds: Option<Vec<u64>>,
    pub label_col: Option<String>,
    pub thresholds: Option<Vec<f64>>,
    pub split_mode: Option<SplitMode>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: Overrides) -> Result<Self, Failure> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Failure::config(format!("{}: {e}", p.display())))?;
                Self::parse(&text).map_err(|e| Failure::config(format!("{}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        if let Some(seeds) = overrides.seeds {
            cfg.run.seeds = seeds;
        }
        if let Some(col) = overrides.label_col {
            cfg.data.label_col = col;
        }
        if let Some(t) = overrides.thresholds {
            cfg.run.thresholds = t;
        }
        if let Some(mode) = overrides.split_mode {
            cfg.data.split_mode = mode;
        }
        if let Some(out) = overrides.out {
            cfg.run.out = out;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<(), Failure> {
        if self.run.seeds.is_empty() {
            return Err(Failure::config("run.seeds: at least one seed is required"));
        }
        if self.run.thresholds.is_empty() {
            return Err(Failure::config("run.thresholds: at least one threshold is required"));
        }
        if let Some(p) = self.run.thresholds.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return Err(Failure::config(format!("run.thresholds: {p} is not in (0, 1)")));
        }
        let f = &self.data.fractions;
        let positive = f.iter().all(|v| v.is_finite() && *v > 0.0);
        if !(2..=3).contains(&f.len()) || !positive || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Failure::config(
                "data.fractions: need 2 or 3 positive fractions summing to 1",
            ));
        }
        if self.data.label_col.is_empty() {
            return Err(Failure::config("data.label_col: must not be empty"));
        }
        self.model
            .validate()
            .map_err(|e| Failure::config(format!("model: {e}")))?;
        for cfg in self.grid_points() {
            cfg.validate().map_err(|e| Failure::config(format!("grid: {e}")))?;
        }
        Ok(())
    }

    /// Every grid point, in a fixed order, with the base model as default.
    pub fn grid_points(&self) -> Vec<SortadConfig> {
        let g = &self.grid;
        let mut points = if g.standard {
            sortad::experiment::default_grid(&self.model)
        } else {
            vec![self.model]
        };
        fn expand<T: Copy>(
            points: Vec<SortadConfig>,
            values: &Option<Vec<T>>,
            set: impl Fn(&mut SortadConfig, T),
        ) -> Vec<SortadConfig> {
            let Some(values) = values else { return points };
            points
                .iter()
                .flat_map(|p| {
                    values.iter().map(|&v| {
                        let mut c = *p;
                        set(&mut c, v);
                        c
                    })
                })
                .collect()
        }
        points = expand(points, &g.num_transformations, |c, v| c.num_transformations = v);
        points = expand(points, &g.num_temp_transformations, |c, v| c.num_temp_transformations = v);
        points = expand(points, &g.epochs, |c, v| c.epochs = v);
        points = expand(points, &g.beta, |c, v| c.beta = v);
        points = expand(points, &g.max_degree, |c, v| c.max_degree = v);
        points = expand(points, &g.divide_factor, |c, v| c.divide_factor = v);
        expand(points, &g.scoring_method, |c, v| c.scoring_method = v)
    }
}
