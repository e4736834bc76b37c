//! Threshold transfer and alert metrics.
//!
//! Scores are normality scores: lower is more anomalous. A threshold is the
//! `p`-quantile of reference scores, and a sample is flagged when its score
//! is at or below the threshold.

use serde::{Deserialize, Serialize};

use crate::data::quantile;
use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLDS: [f64; 2] = [0.03, 0.10];

pub fn learn_threshold(train_scores: &[f64], p: f64) -> Result<f64> {
    if train_scores.is_empty() {
        return Err(Error::invalid("cannot learn a threshold from no scores"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("alert fraction must lie in (0, 1), got {p}")));
    }
    if train_scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("threshold scores must be finite"));
    }
    Ok(quantile(train_scores, p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlertMetrics {
    pub actual_alert_fraction: f64,
    pub non_adjusted_recall: f64,
    pub vs_random: f64,
    pub flagged: usize,
    pub true_positives: usize,
}

fn check_labels(scores: &[f64], labels: &[u8]) -> Result<usize> {
    if scores.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::invalid("labels must be 0 or 1"));
    }
    Ok(labels.iter().filter(|&&l| l == 1).count())
}

pub fn evaluate_at_threshold(scores: &[f64], labels: &[u8], threshold: f64) -> Result<AlertMetrics> {
    let positives = check_labels(scores, labels)?;
    if positives == 0 {
        return Err(Error::invalid("evaluation set contains no anomalies"));
    }
    let mut flagged = 0;
    let mut true_positives = 0;
    for (&s, &l) in scores.iter().zip(labels) {
        if s <= threshold {
            flagged += 1;
            true_positives += usize::from(l);
        }
    }
    let fraction = flagged as f64 / scores.len() as f64;
    let recall = true_positives as f64 / positives as f64;
    Ok(AlertMetrics {
        actual_alert_fraction: fraction,
        non_adjusted_recall: recall,
        vs_random: if flagged == 0 { 0.0 } else { recall / fraction },
        flagged,
        true_positives,
    })
}

/// Probability that a random anomaly scores below a random normal sample,
/// ties counted half. Computed from midranks.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let positives = check_labels(scores, labels)?;
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::invalid("ROC AUC needs both anomalies and normal samples"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Sum of (1-based, tie-averaged) ranks of the normal samples.
    let mut normal_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        let normals = order[i..=j].iter().filter(|&&k| labels[k] == 0).count();
        normal_rank_sum += midrank * normals as f64;
        i = j + 1;
    }
    let n = negatives as f64;
    Ok((normal_rank_sum - n * (n + 1.0) / 2.0) / (n * positives as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub p: f64,
    pub train_threshold_score: f64,
    #[serde(flatten)]
    pub metrics: AlertMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub positives: usize,
    pub roc_auc: f64,
    pub thresholds: Vec<ThresholdReport>,
}

impl EvalReport {
    /// Learn one threshold per `p` on `reference_scores`, apply each to the
    /// labelled evaluation scores.
    pub fn compute(reference_scores: &[f64], scores: &[f64], labels: &[u8], ps: &[f64]) -> Result<Self> {
        let positives = check_labels(scores, labels)?;
        let thresholds = ps
            .iter()
            .map(|&p| {
                let t = learn_threshold(reference_scores, p)?;
                Ok(ThresholdReport {
                    p,
                    train_threshold_score: t,
                    metrics: evaluate_at_threshold(scores, labels, t)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(EvalReport {
            n: scores.len(),
            positives,
            roc_auc: roc_auc(scores, labels)?,
            thresholds,
        })
    }

    pub fn at(&self, p: f64) -> Option<&ThresholdReport> {
        self.thresholds.iter().find(|t| (t.p - p).abs() < 1e-12)
    }

    /// `vs_random` at the first configured threshold.
    pub fn primary_vs_random(&self) -> f64 {
        self.thresholds.first().map_or(0.0, |t| t.metrics.vs_random)
    }
}

/// Mean and sample standard deviation (`n - 1`; zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_examples() {
        let scores: Vec<f64> = (1..=100).map(f64::from).collect();
        let t = learn_threshold(&scores, 0.03).unwrap();
        assert!((3.0..4.0).contains(&t));
        assert_eq!(scores.iter().filter(|&&s| s <= t).count(), 3);

        let sym = [-2.0, -1.0, 0.0, 1.0, 2.0];
        assert_eq!(learn_threshold(&sym, 0.5).unwrap(), 0.0);
        assert_eq!(learn_threshold(&[4.0; 10], 0.1).unwrap(), 4.0);

        assert!(learn_threshold(&[], 0.1).is_err());
        assert!(learn_threshold(&scores, 0.0).is_err());
    }

    #[test]
    fn worked_alert_example() {
        let scores: Vec<f64> = (0..100).map(f64::from).collect();
        let labels: Vec<u8> = (0..100).map(|i| u8::from(i < 5)).collect();
        let m = evaluate_at_threshold(&scores, &labels, 9.0).unwrap();
        assert_eq!(
            (m.actual_alert_fraction, m.non_adjusted_recall, m.vs_random),
            (0.10, 1.0, 10.0)
        );
        let none = evaluate_at_threshold(&scores, &labels, -1.0).unwrap();
        assert_eq!((none.actual_alert_fraction, none.vs_random), (0.0, 0.0));
        assert!(evaluate_at_threshold(&scores, &[0; 100], 9.0).is_err());
    }

    #[test]
    fn tie_is_flagged() {
        let m = evaluate_at_threshold(&[1.0, 2.0, 2.0, 3.0], &[1, 0, 1, 0], 2.0).unwrap();
        assert_eq!(m.flagged, 3);
        assert_eq!(m.true_positives, 2);
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0.0, 1.0, 5.0, 6.0], &[1, 1, 0, 0]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[5.0, 6.0, 0.0, 1.0], &[1, 1, 0, 0]).unwrap(), 0.0);
        assert_eq!(roc_auc(&[1.0, 1.0], &[1, 0]).unwrap(), 0.5);
        assert!(roc_auc(&[1.0, 2.0], &[0, 0]).is_err());
    }

    #[test]
    fn report_lookup() {
        let train: Vec<f64> = (0..100).map(f64::from).collect();
        let labels: Vec<u8> = (0..100).map(|i| u8::from(i < 5)).collect();
        let r = EvalReport::compute(&train, &train, &labels, &DEFAULT_THRESHOLDS).unwrap();
        assert_eq!(r.positives, 5);
        assert_eq!(r.roc_auc, 1.0);
        assert_eq!(r.at(0.03).unwrap().metrics.flagged, 3);
        assert!(r.at(0.5).is_none());
    }

    #[test]
    fn aggregate_arithmetic() {
        let (m, s) = mean_std(&[2.0, 4.0, 6.0]);
        assert_eq!(m, 4.0);
        assert_eq!(s, 2.0);
        assert_eq!(mean_std(&[3.0]), (3.0, 0.0));
    }
}
