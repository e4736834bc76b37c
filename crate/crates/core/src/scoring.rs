//! Normality scores computed from the classifier's predictions.
//!
//! For one sample the classifier produces an `M x M` matrix `P`, where row
//! `m` is the softmax prediction for the sample transformed by
//! transformation `m`. Three scores are derived from it, higher meaning more
//! normal:
//!
//! * summation: `sum_m P[m, m]`;
//! * Dirichlet: `sum_m n_m` with `n_m = sum_j (alpha_mj - 1) ln P[m, j]`;
//! * modified: per transformation, `n_m` when `min_j alpha_mj >= 1`,
//!   otherwise minus the distance of `n_m` from its training mean, multiplied
//!   by `R` when `n_m` is negative.

use std::fmt;
use std::str::FromStr;

use ndarray::{ArrayView1, ArrayView2, ArrayView3, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{digamma, inv_digamma};

pub const DEFAULT_EPSILON: f64 = 1e-12;
pub const DEFAULT_R: f64 = 3.0;

const FIT_TOLERANCE: f64 = 1e-6;
const FIT_MAX_ITERATIONS: usize = 1000;
/// Precision used by the moment estimate when the sample has no spread.
const DEGENERATE_PRECISION: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoringMethod {
    Summation,
    Dirichlet,
    Modified,
}

impl ScoringMethod {
    pub const ALL: [ScoringMethod; 3] = [
        ScoringMethod::Summation,
        ScoringMethod::Dirichlet,
        ScoringMethod::Modified,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScoringMethod::Summation => "summation",
            ScoringMethod::Dirichlet => "dirichlet",
            ScoringMethod::Modified => "modified",
        }
    }
}

impl fmt::Display for ScoringMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScoringMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "summation" => Ok(ScoringMethod::Summation),
            "dirichlet" => Ok(ScoringMethod::Dirichlet),
            "modified" => Ok(ScoringMethod::Modified),
            other => Err(Error::invalid(format!("unknown scoring method {other:?}"))),
        }
    }
}

/// Result of [`fit_dirichlet`].
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletFit {
    pub alpha: Vec<f64>,
    /// False when the fixed point did not converge and `alpha` is the
    /// moment-matching estimate.
    pub converged: bool,
    pub iterations: usize,
}

fn clamp_rows(preds: ArrayView2<f64>, eps: f64) -> Vec<Vec<f64>> {
    preds
        .rows()
        .into_iter()
        .map(|row| {
            let clamped: Vec<f64> = row.iter().map(|&p| p.clamp(eps, 1.0 - eps)).collect();
            let total: f64 = clamped.iter().sum();
            clamped.into_iter().map(|p| p / total).collect()
        })
        .collect()
}

/// Moment-matching estimate; returns `(alpha, degenerate)`.
fn moment_estimate(rows: &[Vec<f64>]) -> (Vec<f64>, bool) {
    let n = rows.len() as f64;
    let k = rows[0].len();
    let mut mean = vec![0.0; k];
    let mut sq = vec![0.0; k];
    for row in rows {
        for j in 0..k {
            mean[j] += row[j] / n;
            sq[j] += row[j] * row[j] / n;
        }
    }
    let precisions: Vec<f64> = (0..k)
        .filter_map(|j| {
            let var = sq[j] - mean[j] * mean[j];
            let s = (mean[j] - sq[j]) / var;
            (var > 0.0 && s.is_finite() && s > 0.0).then_some(s)
        })
        .collect();
    let (precision, degenerate) = if precisions.is_empty() {
        (DEGENERATE_PRECISION, true)
    } else {
        let s = precisions.iter().sum::<f64>() / precisions.len() as f64;
        (s.min(DEGENERATE_PRECISION), false)
    };
    (mean.iter().map(|m| m * precision).collect(), degenerate)
}

/// Maximum-likelihood Dirichlet concentration for row-stochastic `preds`.
///
/// Rows are clamped to `[eps, 1 - eps]` and renormalized. Starts from the
/// moment-matching estimate and iterates
/// `alpha_k <- digamma^-1(digamma(sum alpha) + mean ln p_k)` until the largest
/// relative change is at most `1e-6`.
pub fn fit_dirichlet(preds: ArrayView2<f64>, eps: f64) -> Result<DirichletFit> {
    if preds.nrows() < 2 {
        return Err(Error::invalid("Dirichlet fit needs at least two rows"));
    }
    if preds.ncols() < 1 {
        return Err(Error::invalid("Dirichlet fit needs at least one column"));
    }
    let rows = clamp_rows(preds, eps);
    let (initial, degenerate) = moment_estimate(&rows);
    let fallback = |iterations| DirichletFit {
        alpha: initial.clone(),
        converged: false,
        iterations,
    };
    if degenerate {
        log::warn!("Dirichlet fit: predictions have no spread, using moment estimate");
        return Ok(fallback(0));
    }

    let n = rows.len() as f64;
    let k = rows[0].len();
    let mut mean_log = vec![0.0; k];
    for row in &rows {
        for j in 0..k {
            mean_log[j] += row[j].ln() / n;
        }
    }

    let mut alpha = initial.clone();
    for iter in 1..=FIT_MAX_ITERATIONS {
        let psi_total = digamma(alpha.iter().sum());
        let next: Vec<f64> = mean_log.iter().map(|&ml| inv_digamma(psi_total + ml)).collect();
        if next.iter().any(|a| !a.is_finite() || *a <= 0.0) {
            break;
        }
        let change = next
            .iter()
            .zip(&alpha)
            .map(|(a, b)| ((a - b) / b).abs())
            .fold(0.0, f64::max);
        alpha = next;
        if change <= FIT_TOLERANCE {
            return Ok(DirichletFit {
                alpha,
                converged: true,
                iterations: iter,
            });
        }
    }
    log::warn!("Dirichlet fit did not converge, using moment estimate");
    Ok(fallback(FIT_MAX_ITERATIONS))
}

/// `sum_j (alpha_j - 1) ln max(pred_j, eps)`.
pub fn dirichlet_term(alpha: &[f64], pred: ArrayView1<f64>, eps: f64) -> f64 {
    alpha
        .iter()
        .zip(pred)
        .map(|(&a, &p)| (a - 1.0) * p.max(eps).ln())
        .sum()
}

/// Sum of the probabilities given to the correct transformation.
pub fn summation_score(preds: ArrayView2<f64>) -> f64 {
    preds.diag().sum()
}

/// Per-transformation Dirichlet concentrations and training-mean terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletModel {
    pub alphas: Vec<Vec<f64>>,
    pub train_means: Vec<f64>,
    pub r: f64,
    pub epsilon: f64,
}

impl DirichletModel {
    /// Fit one concentration vector per transformation from training
    /// predictions shaped `samples x M x M`.
    pub fn fit(train_preds: ArrayView3<f64>, r: f64, epsilon: f64) -> Result<(Self, Vec<DirichletFit>)> {
        let (_, m, k) = train_preds.dim();
        if m != k || m == 0 {
            return Err(Error::invalid("training predictions must be samples x M x M"));
        }
        let mut alphas = Vec::with_capacity(m);
        let mut train_means = Vec::with_capacity(m);
        let mut fits = Vec::with_capacity(m);
        for t in 0..m {
            let preds = train_preds.index_axis(Axis(1), t);
            let fit = fit_dirichlet(preds, epsilon)?;
            let mean = preds
                .rows()
                .into_iter()
                .map(|p| dirichlet_term(&fit.alpha, p, epsilon))
                .sum::<f64>()
                / preds.nrows() as f64;
            alphas.push(fit.alpha.clone());
            train_means.push(mean);
            fits.push(fit);
        }
        let model = DirichletModel {
            alphas,
            train_means,
            r,
            epsilon,
        };
        model.validate()?;
        Ok((model, fits))
    }

    pub fn num_transformations(&self) -> usize {
        self.alphas.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.alphas.len();
        if m == 0 {
            return Err(Error::InvalidState("Dirichlet model is not fitted".into()));
        }
        if self.train_means.len() != m || self.alphas.iter().any(|a| a.len() != m) {
            return Err(Error::InvalidState("Dirichlet model shapes are inconsistent".into()));
        }
        if self.alphas.iter().flatten().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(Error::InvalidState("concentration parameters must be positive".into()));
        }
        if self.train_means.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidState("training means must be finite".into()));
        }
        Ok(())
    }

    fn check_sample(&self, preds: ArrayView2<f64>) -> Result<()> {
        let m = self.num_transformations();
        if m == 0 {
            return Err(Error::InvalidState("Dirichlet model is not fitted".into()));
        }
        if preds.dim() != (m, m) {
            return Err(Error::invalid(format!(
                "expected {m} x {m} predictions, got {:?}",
                preds.dim()
            )));
        }
        Ok(())
    }

    /// `n(x) = sum_m n_m(x)`.
    pub fn dirichlet_score(&self, preds: ArrayView2<f64>) -> Result<f64> {
        self.check_sample(preds)?;
        Ok(self
            .alphas
            .iter()
            .zip(preds.rows())
            .map(|(a, p)| dirichlet_term(a, p, self.epsilon))
            .sum())
    }

    /// The piecewise score that measures distance from the training mean
    /// wherever a concentration vector has an entry below one.
    pub fn modified_score(&self, preds: ArrayView2<f64>) -> Result<f64> {
        self.check_sample(preds)?;
        let mut total = 0.0;
        for ((alpha, p), &mean) in self.alphas.iter().zip(preds.rows()).zip(&self.train_means) {
            let n = dirichlet_term(alpha, p, self.epsilon);
            let min_alpha = alpha.iter().copied().fold(f64::INFINITY, f64::min);
            total += if min_alpha >= 1.0 {
                n
            } else if n >= 0.0 {
                -(n - mean).abs()
            } else {
                -(n - mean).abs() * self.r
            };
        }
        Ok(total)
    }

    pub fn score(&self, method: ScoringMethod, preds: ArrayView2<f64>) -> Result<f64> {
        match method {
            ScoringMethod::Summation => {
                self.check_sample(preds)?;
                Ok(summation_score(preds))
            }
            ScoringMethod::Dirichlet => self.dirichlet_score(preds),
            ScoringMethod::Modified => self.modified_score(preds),
        }
    }
}

/// Per-sample scores under all three methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub method: ScoringMethod,
    pub summation: Vec<f64>,
    pub dirichlet: Vec<f64>,
    pub modified: Vec<f64>,
    /// Samples that overflowed under some transformation. They carry the
    /// minimum normality score.
    pub overflow: Vec<bool>,
}

impl ScoreReport {
    pub fn len(&self) -> usize {
        self.summation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.summation.is_empty()
    }

    pub fn scores(&self, method: ScoringMethod) -> &[f64] {
        match method {
            ScoringMethod::Summation => &self.summation,
            ScoringMethod::Dirichlet => &self.dirichlet,
            ScoringMethod::Modified => &self.modified,
        }
    }

    /// Scores of the report's selected method.
    pub fn selected(&self) -> &[f64] {
        self.scores(self.method)
    }

    /// One row per sample: `sample_id,summation,dirichlet,modified,overflow`.
    /// Floats use the shortest round-trip form so files compare byte-for-byte.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["sample_id", "summation", "dirichlet", "modified", "overflow"])?;
        for i in 0..self.len() {
            w.write_record([
                i.to_string(),
                format!("{:e}", self.summation[i]),
                format!("{:e}", self.dirichlet[i]),
                format!("{:e}", self.modified[i]),
                u8::from(self.overflow[i]).to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<score output>", e))?;
        Ok(())
    }
}
