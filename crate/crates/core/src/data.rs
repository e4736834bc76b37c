//! Dataset ingestion, robust scaling, padding and anomaly-rate-preserving splits.

use std::path::Path;

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub feature_names: Vec<String>,
    pub features: Array2<f64>,
    /// `1` marks an anomaly.
    pub labels: Option<Vec<u8>>,
}

/// Summary of rows dropped while reading a CSV file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub accepted: usize,
    pub rejected: usize,
}

impl Dataset {
    pub fn new(name: impl Into<String>, features: Array2<f64>, labels: Option<Vec<u8>>) -> Result<Self> {
        let feature_names = (0..features.ncols()).map(|j| format!("x{j}")).collect();
        let ds = Dataset {
            name: name.into(),
            feature_names,
            features,
            labels,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(labels) = &self.labels {
            if labels.len() != self.features.nrows() {
                return Err(Error::Data(format!(
                    "{}: {} labels for {} rows",
                    self.name,
                    labels.len(),
                    self.features.nrows()
                )));
            }
            if labels.iter().any(|&l| l > 1) {
                return Err(Error::Data(format!("{}: labels must be 0 or 1", self.name)));
            }
        }
        if self.feature_names.len() != self.features.ncols() {
            return Err(Error::Data(format!("{}: feature name count mismatch", self.name)));
        }
        if self.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!("{}: non-finite feature value", self.name)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    pub fn num_anomalies(&self) -> usize {
        self.labels
            .as_ref()
            .map_or(0, |l| l.iter().filter(|&&v| v == 1).count())
    }

    pub fn labels_or_err(&self) -> Result<&[u8]> {
        self.labels
            .as_deref()
            .ok_or_else(|| Error::Data(format!("{}: dataset has no labels", self.name)))
    }

    /// Rows `idx` (in the given order) as a new dataset.
    pub fn subset(&self, name: impl Into<String>, idx: &[usize]) -> Dataset {
        Dataset {
            name: name.into(),
            feature_names: self.feature_names.clone(),
            features: self.features.select(Axis(0), idx),
            labels: self
                .labels
                .as_ref()
                .map(|l| idx.iter().map(|&i| l[i]).collect()),
        }
    }

    /// Read a headered CSV file. Every column except `label_col` is a
    /// feature. Rows with missing, unparsable or non-finite values are
    /// dropped and counted.
    pub fn from_csv(path: &Path, label_col: Option<&str>) -> Result<(Dataset, IngestReport)> {
        let mut reader = csv::Reader::from_path(path)?;
        let headers = reader.headers()?.clone();
        let label_idx = match label_col {
            Some(name) => Some(headers.iter().position(|h| h.trim() == name).ok_or_else(|| {
                Error::Data(format!("{}: no column named {name:?}", path.display()))
            })?),
            None => None,
        };
        let feature_cols: Vec<usize> = (0..headers.len()).filter(|&j| Some(j) != label_idx).collect();
        if feature_cols.is_empty() {
            return Err(Error::Data(format!("{}: no feature columns", path.display())));
        }
        let mut values = Vec::new();
        let mut labels = Vec::new();
        let mut report = IngestReport::default();
        for record in reader.records() {
            let record = record?;
            let parsed: Option<Vec<f64>> = feature_cols
                .iter()
                .map(|&j| {
                    record
                        .get(j)
                        .and_then(|s| s.trim().parse::<f64>().ok())
                        .filter(|v| v.is_finite())
                })
                .collect();
            let label = match label_idx {
                Some(j) => match record.get(j).map(str::trim) {
                    Some(s) => match s.parse::<f64>() {
                        Ok(v) if v == 0.0 => Some(0u8),
                        Ok(v) if v == 1.0 => Some(1u8),
                        _ => {
                            return Err(Error::Data(format!(
                                "{}: label {s:?} is not 0 or 1",
                                path.display()
                            )))
                        }
                    },
                    None => None,
                },
                None => Some(0),
            };
            match (parsed, label) {
                (Some(row), Some(l)) => {
                    values.extend(row);
                    labels.push(l);
                    report.accepted += 1;
                }
                _ => report.rejected += 1,
            }
        }
        if report.rejected > 0 {
            log::warn!("{}: rejected {} rows with missing values", path.display(), report.rejected);
        }
        let features = Array2::from_shape_vec((report.accepted, feature_cols.len()), values)
            .expect("row-major buffer matches shape");
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let ds = Dataset {
            name,
            feature_names: feature_cols.iter().map(|&j| headers[j].trim().to_string()).collect(),
            features,
            labels: label_idx.map(|_| labels),
        };
        ds.validate()?;
        Ok((ds, report))
    }

    /// Write features (and a `label` column, when present) as CSV with
    /// round-trip exact float formatting.
    pub fn to_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        if self.labels.is_some() {
            header.push("label");
        }
        w.write_record(&header)?;
        for (i, row) in self.features.rows().into_iter().enumerate() {
            let mut rec: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            if let Some(l) = &self.labels {
                rec.push(l[i].to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Linear-interpolation quantile of sorted data (R type 7).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustScaler {
    pub medians: Vec<f64>,
    /// `Q3 - Q1`, replaced by 1 for constant columns.
    pub iqrs: Vec<f64>,
}

impl RobustScaler {
    pub fn fit(train: ArrayView2<f64>) -> Result<Self> {
        if train.nrows() == 0 {
            return Err(Error::invalid("cannot fit a scaler on an empty matrix"));
        }
        let mut medians = Vec::with_capacity(train.ncols());
        let mut iqrs = Vec::with_capacity(train.ncols());
        for col in train.columns() {
            let mut sorted = col.to_vec();
            sorted.sort_by(f64::total_cmp);
            medians.push(quantile_sorted(&sorted, 0.5));
            let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
            iqrs.push(if iqr > 0.0 { iqr } else { 1.0 });
        }
        Ok(RobustScaler { medians, iqrs })
    }

    fn check(&self, cols: usize) -> Result<()> {
        if cols != self.medians.len() {
            return Err(Error::invalid(format!(
                "scaler fitted on {} columns, got {cols}",
                self.medians.len()
            )));
        }
        Ok(())
    }

    pub fn transform(&self, xs: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check(xs.ncols())?;
        let mut out = xs.to_owned();
        for (mut col, (m, s)) in out.columns_mut().into_iter().zip(self.medians.iter().zip(&self.iqrs)) {
            col.mapv_inplace(|v| (v - m) / s);
        }
        Ok(out)
    }

    pub fn inverse_transform(&self, xs: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check(xs.ncols())?;
        let mut out = xs.to_owned();
        for (mut col, (m, s)) in out.columns_mut().into_iter().zip(self.medians.iter().zip(&self.iqrs)) {
            col.mapv_inplace(|v| v * s + m);
        }
        Ok(out)
    }
}

/// Append a zero column when the feature count is odd.
pub fn pad_even(xs: ArrayView2<f64>) -> Array2<f64> {
    if xs.ncols().is_multiple_of(2) {
        xs.to_owned()
    } else {
        let zeros = Array2::zeros((xs.nrows(), 1));
        concatenate(Axis(1), &[xs, zeros.view()]).expect("row counts match")
    }
}

fn check_fractions(fractions: &[f64]) -> Result<()> {
    if fractions.is_empty() || fractions.iter().any(|&f| !(f > 0.0 && f <= 1.0)) {
        return Err(Error::invalid(format!("split fractions must lie in (0, 1], got {fractions:?}")));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("split fractions sum to {total}, not 1")));
    }
    Ok(())
}

/// Largest-remainder apportionment of `count` items; ties go to earlier splits.
fn apportion(count: usize, fractions: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = fractions.iter().map(|f| f * count as f64).collect();
    let mut sizes: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut left = count - sizes.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        sizes[i] += 1;
        left -= 1;
    }
    sizes
}

fn split_names(ds: &Dataset, n: usize) -> Vec<String> {
    const NAMES: [&str; 3] = ["train", "validation", "test"];
    (0..n)
        .map(|i| match (n, i) {
            (2, 1) => format!("{}-test", ds.name),
            (_, i) if i < 3 => format!("{}-{}", ds.name, NAMES[i]),
            _ => format!("{}-split{i}", ds.name),
        })
        .collect()
}

/// Shuffle anomalies and normals separately and deal them into splits so
/// every split keeps the global anomaly rate (within one sample).
pub fn stratified_split(ds: &Dataset, fractions: &[f64], seed: u64) -> Result<Vec<Dataset>> {
    check_fractions(fractions)?;
    let labels = ds.labels_or_err()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut anomalies: Vec<usize> = (0..ds.len()).filter(|&i| labels[i] == 1).collect();
    let mut normals: Vec<usize> = (0..ds.len()).filter(|&i| labels[i] == 0).collect();
    anomalies.shuffle(&mut rng);
    normals.shuffle(&mut rng);
    let a_sizes = apportion(anomalies.len(), fractions);
    let n_sizes = apportion(normals.len(), fractions);
    let names = split_names(ds, fractions.len());

    let (mut a_at, mut n_at) = (0, 0);
    let mut out = Vec::with_capacity(fractions.len());
    for (i, name) in names.into_iter().enumerate() {
        let mut idx: Vec<usize> = anomalies[a_at..a_at + a_sizes[i]]
            .iter()
            .chain(&normals[n_at..n_at + n_sizes[i]])
            .copied()
            .collect();
        a_at += a_sizes[i];
        n_at += n_sizes[i];
        if idx.is_empty() {
            return Err(Error::invalid(format!("split {i} would receive no samples")));
        }
        idx.sort_unstable();
        out.push(ds.subset(name, &idx));
    }
    Ok(out)
}

/// Cut by row order (for time-ordered data). Anomaly counts per segment are
/// logged, not balanced.
pub fn sequential_split(ds: &Dataset, fractions: &[f64]) -> Result<Vec<Dataset>> {
    check_fractions(fractions)?;
    let sizes = apportion(ds.len(), fractions);
    let names = split_names(ds, fractions.len());
    let mut at = 0;
    let mut out = Vec::with_capacity(fractions.len());
    for (i, name) in names.into_iter().enumerate() {
        if sizes[i] == 0 {
            return Err(Error::invalid(format!("split {i} would receive no samples")));
        }
        let idx: Vec<usize> = (at..at + sizes[i]).collect();
        at += sizes[i];
        let part = ds.subset(name, &idx);
        log::info!("{}: {} rows, {} anomalies", part.name, part.len(), part.num_anomalies());
        out.push(part);
    }
    Ok(out)
}
