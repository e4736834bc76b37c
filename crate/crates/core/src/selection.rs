//! Greedy selection of transformations.
//!
//! Each round draws `K` temporary candidates and keeps the one whose output
//! is compact around its own center and far (in L1) from every center chosen
//! so far. The untransformed training data's center seeds the set of
//! previous centers.

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transform::{GenParams, TransformationSpec};

pub const DEFAULT_BETA: f64 = 0.5;
pub const DEFAULT_SUBSAMPLE: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformBank {
    pub specs: Vec<TransformationSpec>,
    /// Mean of each selected transformation's output on the selection data.
    pub centers: Vec<Vec<f64>>,
    pub beta: f64,
}

impl TransformBank {
    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.specs.first().map(|s| s.dim())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    /// `M`, transformations to keep.
    pub num_transformations: usize,
    /// `K`, temporary candidates drawn per round.
    pub num_candidates: usize,
    pub beta: f64,
    pub gen: GenParams,
    /// Rows used for scoring; larger training sets are subsampled.
    pub max_rows: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            num_transformations: 10,
            num_candidates: 20,
            beta: DEFAULT_BETA,
            gen: GenParams::default(),
            max_rows: DEFAULT_SUBSAMPLE,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_transformations < 1 {
            return Err(Error::invalid("number of transformations must be at least 1"));
        }
        if self.num_candidates < 1 {
            return Err(Error::invalid("number of temporary transformations must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::invalid(format!("beta must lie in [0, 1], got {}", self.beta)));
        }
        if self.max_rows < 1 {
            return Err(Error::invalid("selection subsample size must be at least 1"));
        }
        self.gen.validate()
    }
}

/// Per-round record of candidate scores (`None` = overflowed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRound {
    pub round: usize,
    pub scores: Vec<Option<f64>>,
    pub chosen: usize,
}

impl SelectionRound {
    pub fn chosen_score(&self) -> f64 {
        self.scores[self.chosen].expect("chosen candidate has a score")
    }
}

/// Column-wise arithmetic mean.
pub fn center_of_mass(transformed: ArrayView2<f64>) -> Result<Vec<f64>> {
    if transformed.nrows() == 0 {
        return Err(Error::invalid("center of mass of an empty matrix"));
    }
    let n = transformed.nrows() as f64;
    let mut sums = vec![0.0; transformed.ncols()];
    for row in transformed.rows() {
        for (s, v) in sums.iter_mut().zip(row) {
            *s += v;
        }
    }
    Ok(sums.into_iter().map(|s| s / n).collect())
}

fn l1(a: ndarray::ArrayView1<f64>, b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, c)| (x - c).abs()).sum()
}

/// `(1 - beta) * sum_i min_prev |x_i - c_prev|_1 - beta * sum_i |x_i - c|_1`.
///
/// Higher is better: far from every previous center, tight around its own.
pub fn tscore(
    candidate_out: ArrayView2<f64>,
    candidate_center: &[f64],
    prev_centers: &[Vec<f64>],
    beta: f64,
) -> Result<f64> {
    if prev_centers.is_empty() {
        return Err(Error::invalid("tscore needs at least one previous center"));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::invalid(format!("beta must lie in [0, 1], got {beta}")));
    }
    let d = candidate_out.ncols();
    if candidate_center.len() != d || prev_centers.iter().any(|c| c.len() != d) {
        return Err(Error::invalid("tscore dimension mismatch"));
    }
    let mut outer = 0.0;
    let mut inner = 0.0;
    for row in candidate_out.rows() {
        outer += prev_centers
            .iter()
            .map(|c| l1(row, c))
            .fold(f64::INFINITY, f64::min);
        inner += l1(row, candidate_center);
    }
    Ok((1.0 - beta) * outer - beta * inner)
}

/// A candidate's tscore and output center; `None` when it overflowed.
pub type CandidateScore = Option<(f64, Vec<f64>)>;

/// Score each candidate against `prev_centers`; overflowing candidates get
/// `None`. Returns the scores and the candidate outputs' centers.
pub fn score_candidates(
    data: ArrayView2<f64>,
    candidates: &[TransformationSpec],
    prev_centers: &[Vec<f64>],
    beta: f64,
) -> Result<Vec<CandidateScore>> {
    candidates
        .par_iter()
        .map(|spec| match spec.forward_batch(data) {
            Ok(out) => {
                let center = center_of_mass(out.view())?;
                let score = tscore(out.view(), &center, prev_centers, beta)?;
                Ok(score.is_finite().then_some((score, center)))
            }
            Err(e) if e.is_overflow() => Ok(None),
            Err(e) => Err(e),
        })
        .collect()
}

/// Index of the highest score; ties go to the lowest index.
pub fn argmax_first(scores: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.iter().enumerate() {
        if let Some(s) = *s {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
    }
    best.map(|(i, _)| i)
}

/// Draw the rows used for selection: all of `train`, or a seeded uniform
/// subsample of `max_rows` rows (kept in original order).
pub fn selection_rows<R: Rng + ?Sized>(
    train: ArrayView2<f64>,
    max_rows: usize,
    rng: &mut R,
) -> Array2<f64> {
    if train.nrows() <= max_rows {
        return train.to_owned();
    }
    let mut idx = sample(rng, train.nrows(), max_rows).into_vec();
    idx.sort_unstable();
    train.select(Axis(0), &idx)
}

/// Greedily select `M` transformations, drawing `K` candidates per round.
pub fn select_transformations<R: Rng + ?Sized>(
    train: ArrayView2<f64>,
    cfg: &SelectionConfig,
    rng: &mut R,
) -> Result<(TransformBank, Vec<SelectionRound>)> {
    cfg.validate()?;
    if train.nrows() == 0 {
        return Err(Error::invalid("selection requires a non-empty training matrix"));
    }
    let data = selection_rows(train, cfg.max_rows, rng);
    let mut prev_centers = vec![center_of_mass(data.view())?];
    let mut specs = Vec::with_capacity(cfg.num_transformations);
    let mut centers = Vec::with_capacity(cfg.num_transformations);
    let mut rounds = Vec::with_capacity(cfg.num_transformations);

    for round in 0..cfg.num_transformations {
        let candidates = (0..cfg.num_candidates)
            .map(|_| TransformationSpec::generate(rng, round, data.ncols(), &cfg.gen))
            .collect::<Result<Vec<_>>>()?;
        let scored = score_candidates(data.view(), &candidates, &prev_centers, cfg.beta)?;
        let scores: Vec<Option<f64>> = scored.iter().map(|s| s.as_ref().map(|(v, _)| *v)).collect();
        let chosen = argmax_first(&scores).ok_or(Error::SelectionFailure {
            round,
            candidates: cfg.num_candidates,
        })?;
        log::debug!("selection round {round}: kept candidate {chosen} (tscore {:?})", scores[chosen]);
        let (_, center) = scored[chosen].clone().expect("chosen candidate scored");
        prev_centers.push(center.clone());
        centers.push(center);
        specs.push(candidates[chosen].clone());
        rounds.push(SelectionRound {
            round,
            scores,
            chosen,
        });
    }
    Ok((
        TransformBank {
            specs,
            centers,
            beta: cfg.beta,
        },
        rounds,
    ))
}
