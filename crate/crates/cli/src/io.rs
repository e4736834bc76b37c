//! Dataset loading and output files.

use std::path::{Path, PathBuf};

use sortad::data::{sequential_split, stratified_split, Dataset};
use sortad::experiment::Splits;

use crate::config::{RunConfig, SplitMode};
use crate::failure::Failure;

/// Read a CSV. With `require_labels` false, the label column is used only
/// when the header has it.
pub fn read_dataset(path: &Path, label_col: &str, require_labels: bool) -> Result<Dataset, Failure> {
    let has_label = require_labels || {
        let mut reader = csv::Reader::from_path(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
        let headers = reader.headers().map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
        headers.iter().any(|h| h.trim() == label_col)
    };
    let (ds, report) = Dataset::from_csv(path, has_label.then_some(label_col)).map_err(Failure::from_data)?;
    if ds.is_empty() {
        return Err(Failure::data(format!("{}: no usable rows", path.display())));
    }
    log::info!(
        "{}: {} rows, {} features, {} rejected",
        path.display(),
        report.accepted,
        ds.features.ncols(),
        report.rejected
    );
    Ok(ds)
}

/// Train, validation and test sets, either read from pre-split files or
/// cut from `data.dataset`. Held-out sets must carry labels.
pub fn load_splits(cfg: &RunConfig) -> Result<Splits, Failure> {
    let d = &cfg.data;
    if let Some(path) = &d.dataset {
        let ds = read_dataset(path, &d.label_col, true)?;
        let parts = match d.split_mode {
            SplitMode::Stratified => stratified_split(&ds, &d.fractions, d.split_seed),
            SplitMode::Sequential => sequential_split(&ds, &d.fractions),
        }
        .map_err(Failure::from_data)?;
        for p in &parts {
            log::info!("{}: {} rows, {} anomalies", p.name, p.len(), p.num_anomalies());
        }
        let mut parts = parts.into_iter();
        let train = parts.next().expect("at least two splits");
        let (validation, test) = if d.fractions.len() == 3 {
            (parts.next(), parts.next().expect("three splits"))
        } else {
            (None, parts.next().expect("two splits"))
        };
        return Ok(Splits { train, validation, test });
    }
    let (Some(train), Some(test)) = (&d.train, &d.test) else {
        return Err(Failure::config(
            "data: set either data.dataset or both data.train and data.test",
        ));
    };
    Ok(Splits {
        train: read_dataset(train, &d.label_col, false)?,
        validation: d
            .validation
            .as_ref()
            .map(|v| read_dataset(v, &d.label_col, true))
            .transpose()?,
        test: read_dataset(test, &d.label_col, true)?,
    })
}

/// The training set alone; labels are optional.
pub fn load_train(cfg: &RunConfig) -> Result<Dataset, Failure> {
    match (&cfg.data.train, &cfg.data.dataset) {
        (Some(path), _) => read_dataset(path, &cfg.data.label_col, false),
        (None, Some(_)) => Ok(load_splits(cfg)?.train),
        (None, None) => Err(Failure::config("data: set data.dataset or data.train")),
    }
}

pub fn create_dir(path: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(path).map_err(|e| Failure::io(path, e))
}

/// Write through a temporary sibling and rename, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, contents).map_err(|e| Failure::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Failure::io(path, e))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}
