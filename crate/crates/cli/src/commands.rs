use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sortad::evaluation::EvalReport;
use sortad::experiment::{self, Aggregate, RunResult, ScoredRun, SweepAxis};
use sortad::model_file;
use sortad::pipeline::{self, SortadConfig};
use sortad::scoring::ScoringMethod;
use sortad::selection::SelectionRound;

use crate::config::RunConfig;
use crate::failure::Failure;
use crate::io::{self, write_atomic, write_json};

pub const CONFIG_ECHO: &str = "config.toml";

fn echo_config(cfg: &RunConfig) -> Result<(), Failure> {
    write_atomic(&cfg.run.out.join(CONFIG_ECHO), cfg.to_toml().as_bytes())
}

#[derive(Serialize)]
struct DirichletLog {
    alpha: Vec<f64>,
    converged: bool,
    iterations: usize,
}

#[derive(Serialize)]
struct TrainLogEntry {
    model: PathBuf,
    grid_point: usize,
    seed: u64,
    config: SortadConfig,
    selection: Vec<SelectionRound>,
    epoch_losses: Vec<f64>,
    final_loss: f64,
    dirichlet: Vec<DirichletLog>,
}

pub fn model_name(grid_point: usize, seed: u64) -> String {
    format!("g{grid_point:02}-seed{seed}.sortad")
}

/// One model per (grid point, seed) under `out/models`, plus `train_log.json`.
pub fn train(cfg: &RunConfig) -> Result<(), Failure> {
    let train = io::load_train(cfg)?;
    let models = cfg.run.out.join("models");
    io::create_dir(&models)?;
    echo_config(cfg)?;
    let mut log_entries = Vec::new();
    for (gi, point) in cfg.grid_points().into_iter().enumerate() {
        for &seed in &cfg.run.seeds {
            let model_cfg = SortadConfig { seed, ..point };
            log::info!(
                "grid point {gi}, seed {seed}: M={} K={} epochs={}",
                model_cfg.num_transformations,
                model_cfg.num_temp_transformations,
                model_cfg.epochs
            );
            let (model, report) = pipeline::fit(train.features.view(), &model_cfg).map_err(Failure::from_fit)?;
            for round in &report.selection {
                log::info!("  selection round {}: tscore {:e}", round.round, round.chosen_score());
            }
            log::info!("  final training loss {:e}", report.training.final_loss());
            let path = models.join(model_name(gi, seed));
            write_atomic(&path, model_file::to_string(&model).as_bytes())?;
            log_entries.push(TrainLogEntry {
                model: path,
                grid_point: gi,
                seed,
                config: model_cfg,
                selection: report.selection,
                final_loss: report.training.final_loss(),
                epoch_losses: report.training.epoch_losses,
                dirichlet: report
                    .dirichlet
                    .into_iter()
                    .map(|f| DirichletLog {
                        alpha: f.alpha,
                        converged: f.converged,
                        iterations: f.iterations,
                    })
                    .collect(),
            });
        }
    }
    write_json(&cfg.run.out.join("train_log.json"), &log_entries)
}

/// Score one CSV with one model; labels, if present, are ignored.
pub fn score(cfg: &RunConfig, model_path: &Path, input: &Path, output: Option<&Path>) -> Result<(), Failure> {
    let model = model_file::load(model_path).map_err(Failure::from_data)?;
    let ds = io::read_dataset(input, &cfg.data.label_col, false)?;
    let report = pipeline::score(&model, ds.features.view(), model.config.scoring_method).map_err(Failure::from_data)?;
    let flagged = report.overflow.iter().filter(|&&f| f).count();
    if flagged > 0 {
        log::warn!("{flagged} samples overflowed and received the minimum score");
    }
    let mut buf = Vec::new();
    report.write_csv(&mut buf).map_err(Failure::from_data)?;
    let path = output.map_or_else(|| cfg.run.out.join("scores.csv"), Path::to_path_buf);
    write_atomic(&path, &buf)?;
    log::info!("wrote {} scores to {}", report.len(), path.display());
    Ok(())
}

fn report_text(name: &str, r: &EvalReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "split = {name}");
    let _ = writeln!(s, "n = {}", r.n);
    let _ = writeln!(s, "positives = {}", r.positives);
    let _ = writeln!(s, "roc_auc = {}", r.roc_auc);
    for t in &r.thresholds {
        let m = &t.metrics;
        let _ = writeln!(s, "threshold[{}].train_threshold_score = {}", t.p, t.train_threshold_score);
        let _ = writeln!(s, "threshold[{}].actual_alert_fraction = {}", t.p, m.actual_alert_fraction);
        let _ = writeln!(s, "threshold[{}].non_adjusted_recall = {}", t.p, m.non_adjusted_recall);
        let _ = writeln!(s, "threshold[{}].vs_random = {}", t.p, m.vs_random);
    }
    s
}

fn default_models(out: &Path) -> Result<Vec<PathBuf>, Failure> {
    let dir = out.join("models");
    let entries = std::fs::read_dir(&dir).map_err(|e| Failure::io(&dir, e))?;
    let mut models: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "sortad"))
        .collect();
    models.sort();
    if models.is_empty() {
        return Err(Failure::data(format!("{}: no model files", dir.display())));
    }
    Ok(models)
}

#[derive(Serialize)]
struct Summary {
    thresholds: Vec<f64>,
    /// Index into `grid` of the best point on validation, when a validation set exists.
    best: Option<usize>,
    grid: Vec<Aggregate>,
}

/// Per-model reports under `out/reports`, and a per-grid-point summary
/// across seeds in `summary.json` and `summary.csv`.
pub fn evaluate(cfg: &RunConfig, models: &[PathBuf]) -> Result<(), Failure> {
    let models = if models.is_empty() {
        default_models(&cfg.run.out)?
    } else {
        models.to_vec()
    };
    let splits = io::load_splits(cfg)?;
    splits.test.labels_or_err().map_err(Failure::from_data)?;
    echo_config(cfg)?;
    let reports = cfg.run.out.join("reports");

    // Runs grouped by configuration, seed excluded, in first-seen order.
    let mut groups: Vec<(SortadConfig, Vec<RunResult>)> = Vec::new();
    for path in &models {
        let model = model_file::load(path).map_err(Failure::from_data)?;
        let score = |ds: &sortad::data::Dataset| {
            pipeline::score(&model, ds.features.view(), model.config.scoring_method).map_err(Failure::from_data)
        };
        let run = ScoredRun {
            train: score(&splits.train)?,
            validation: splits.validation.as_ref().map(score).transpose()?,
            test: score(&splits.test)?,
            model,
        };
        let result = experiment::evaluate_run(
            &run,
            &splits,
            run.model.config.scoring_method,
            &cfg.run.thresholds,
            cfg.run.threshold_source,
        )
        .map_err(Failure::from_data)?;
        let stem = path.file_stem().map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned());
        write_json(&reports.join(format!("{stem}.json")), &result)?;
        let mut text = report_text("test", &result.test);
        if let Some(v) = &result.validation {
            text.push('\n');
            text.push_str(&report_text("validation", v));
        }
        write_atomic(&reports.join(format!("{stem}.txt")), text.as_bytes())?;
        log::info!(
            "{}: test roc_auc {:.4}, vs_random {:.3}",
            path.display(),
            result.test.roc_auc,
            result.test.primary_vs_random()
        );

        let key = SortadConfig { seed: 0, ..result.config };
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, runs)) => runs.push(result),
            None => groups.push((key, vec![result])),
        }
    }
    let aggregates = groups
        .iter()
        .map(|(_, runs)| experiment::aggregate(runs))
        .collect::<sortad::Result<Vec<_>>>()
        .map_err(Failure::from_data)?;
    let best = experiment::best_on_validation(&aggregates);
    write_atomic(&cfg.run.out.join("summary.csv"), summary_csv(&cfg.run.thresholds, &aggregates, best).as_bytes())?;
    write_json(
        &cfg.run.out.join("summary.json"),
        &Summary {
            thresholds: cfg.run.thresholds.clone(),
            best,
            grid: aggregates,
        },
    )
}

fn summary_csv(thresholds: &[f64], aggregates: &[Aggregate], best: Option<usize>) -> String {
    let mut s = String::from("num_transformations,num_temp_transformations,epochs,beta,scoring_method,seeds");
    for p in thresholds {
        let _ = write!(s, ",vs_random_mean@{p},vs_random_std@{p}");
    }
    s.push_str(",roc_auc_mean,roc_auc_std,validation_vs_random,best\n");
    for (i, a) in aggregates.iter().enumerate() {
        let c = &a.config;
        let seeds: Vec<String> = a.seeds.iter().map(u64::to_string).collect();
        let _ = write!(
            s,
            "{},{},{},{},{},{}",
            c.num_transformations,
            c.num_temp_transformations,
            c.epochs,
            c.beta,
            c.scoring_method,
            seeds.join(" ")
        );
        for v in &a.vs_random {
            let _ = write!(s, ",{},{}", v.mean, v.std);
        }
        let validation = a.validation_vs_random.map_or_else(String::new, |v| v.to_string());
        let _ = writeln!(
            s,
            ",{},{},{},{}",
            a.roc_auc.mean,
            a.roc_auc.std,
            validation,
            u8::from(best == Some(i))
        );
    }
    s
}

/// Vary one axis across seeds; writes `sweep-<axis>.csv`.
pub fn sweep(cfg: &RunConfig, axis: Option<SweepAxis>, values: &[String]) -> Result<PathBuf, Failure> {
    let axis = axis
        .or(cfg.sweep.axis)
        .ok_or_else(|| Failure::config("sweep: no axis given (--axis or sweep.axis)"))?;
    let values = if values.is_empty() { cfg.sweep.values.clone() } else { values.to_vec() };
    if values.is_empty() {
        return Err(Failure::config("sweep: no axis values given (--values or sweep.values)"));
    }
    for v in &values {
        check_sweep_value(axis, v, &cfg.model).map_err(|e| Failure::config(format!("sweep.values: {e}")))?;
    }
    let splits = io::load_splits(cfg)?;
    splits.test.labels_or_err().map_err(Failure::from_data)?;
    echo_config(cfg)?;
    let rows = experiment::sweep(
        axis,
        &values,
        &cfg.model,
        &cfg.run.seeds,
        &splits,
        &cfg.run.thresholds,
        cfg.run.threshold_source,
    )
    .map_err(Failure::from_fit)?;

    let p = cfg.run.thresholds[0];
    let mut s = format!("{},vs_random_mean@{p},vs_random_std@{p},roc_auc_mean,roc_auc_std\n", axis.name());
    for r in &rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.value, r.vs_random.mean, r.vs_random.std, r.roc_auc.mean, r.roc_auc.std
        );
    }
    let path = cfg.run.out.join(format!("sweep-{}.csv", axis.name()));
    write_atomic(&path, s.as_bytes())?;
    log::info!("wrote {}", path.display());
    Ok(path)
}

fn check_sweep_value(axis: SweepAxis, v: &str, base: &SortadConfig) -> Result<(), String> {
    let mut cfg = *base;
    let count = || v.trim().parse::<usize>().map_err(|_| format!("{v:?} is not a positive integer"));
    match axis {
        SweepAxis::NumTransformations => cfg.num_transformations = count()?,
        SweepAxis::NumTempTransformations => cfg.num_temp_transformations = count()?,
        SweepAxis::ScoringMethod => cfg.scoring_method = v.trim().parse::<ScoringMethod>().map_err(|e| e.to_string())?,
    }
    cfg.validate().map_err(|e| e.to_string())
}
