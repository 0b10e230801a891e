//! Segmentation metrics, ranking metrics and k-fold splitting.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ensure_dims, BinaryMask};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            tn: self.tn + o.tn,
            fn_: self.fn_ + o.fn_,
        }
    }
}

pub fn confusion(pred: &BinaryMask, gt: &BinaryMask) -> Result<ConfusionCounts> {
    ensure_dims(gt.dims(), pred.dims())?;
    confusion_from_labels(pred.values(), gt.values())
}

pub fn confusion_from_labels(pred: &[bool], gt: &[bool]) -> Result<ConfusionCounts> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch {
            expected: gt.len(),
            actual: pred.len(),
        });
    }
    let mut c = ConfusionCounts::default();
    for (&p, &g) in pred.iter().zip(gt) {
        match (p, g) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

fn ratio(metric: &'static str, num: u64, den: u64) -> Result<f64> {
    if den == 0 {
        return Err(Error::UndefinedMetric { metric });
    }
    Ok(num as f64 / den as f64)
}

/// `tp / (tp + fp + fn)`
pub fn jaccard(c: &ConfusionCounts) -> Result<f64> {
    ratio("jaccard", c.tp, c.tp + c.fp + c.fn_)
}

/// `2 tp / (2 tp + fp + fn)`
pub fn dice(c: &ConfusionCounts) -> Result<f64> {
    ratio("dice", 2 * c.tp, 2 * c.tp + c.fp + c.fn_)
}

pub fn pixel_ac(c: &ConfusionCounts) -> Result<f64> {
    ratio("accuracy", c.tp + c.tn, c.total())
}

pub fn pixel_se(c: &ConfusionCounts) -> Result<f64> {
    ratio("sensitivity", c.tp, c.tp + c.fn_)
}

pub fn pixel_sp(c: &ConfusionCounts) -> Result<f64> {
    ratio("specificity", c.tn, c.tn + c.fp)
}

/// Dice between two hard masks.
pub fn mask_dice(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    dice(&confusion(pred, gt)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub jaccard: f64,
    pub dice: f64,
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub auc: Option<f64>,
    pub average_precision: Option<f64>,
    pub counts: ConfusionCounts,
}

impl EvalReport {
    /// Hard-label report; fails if any of the five metrics is undefined.
    pub fn from_counts(c: ConfusionCounts) -> Result<Self> {
        Ok(Self {
            jaccard: jaccard(&c)?,
            dice: dice(&c)?,
            accuracy: pixel_ac(&c)?,
            sensitivity: pixel_se(&c)?,
            specificity: pixel_sp(&c)?,
            auc: None,
            average_precision: None,
            counts: c,
        })
    }

    /// Full report from per-sample scores: hard labels are `score > threshold`.
    pub fn from_scores(scores: &[f64], labels: &[bool], threshold: f64) -> Result<Self> {
        check_scores(scores, labels)?;
        let pred: Vec<bool> = scores.iter().map(|&s| s > threshold).collect();
        let mut report = Self::from_counts(confusion_from_labels(&pred, labels)?)?;
        report.auc = Some(roc_auc(scores, labels)?);
        report.average_precision = Some(average_precision(scores, labels)?);
        Ok(report)
    }
}

pub fn evaluate_masks(pred: &BinaryMask, gt: &BinaryMask) -> Result<EvalReport> {
    EvalReport::from_counts(confusion(pred, gt)?)
}

fn check_scores(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: labels.len(),
            actual: scores.len(),
        });
    }
    if let Some(index) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(())
}

/// Area under the ROC curve as the normalised Mann-Whitney statistic, with tied
/// positive/negative pairs counted as one half.
///
/// Tied scores share their average rank. Twice every average rank is an integer,
/// so the statistic is accumulated exactly in integers.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_scores(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l).count() as u128;
    let n_neg = labels.len() as u128 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut twice_rank_sum: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // 1-based ranks start+1 ..= end share the average (start + 1 + end) / 2.
        let twice_avg = (start + 1 + end) as u128;
        let pos_in_group = order[start..end].iter().filter(|&&k| labels[k]).count() as u128;
        twice_rank_sum += twice_avg * pos_in_group;
        start = end;
    }
    let twice_u = twice_rank_sum - n_pos * (n_pos + 1);
    Ok(twice_u as f64 / (2 * n_pos * n_neg) as f64)
}

/// Indices sorted by descending score; equal scores keep their input order.
fn descending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));
    order
}

/// Non-interpolated average precision: the mean, over positives, of the
/// precision at each positive's rank.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_scores(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 {
        return Err(Error::UndefinedMetric {
            metric: "average precision",
        });
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &k) in descending(scores).iter().enumerate() {
        if labels[k] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(sum / n_pos as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    /// Samples with `score >= threshold` are predicted positive.
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Precision/recall at every distinct score, from the highest down.
pub fn pr_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<PrPoint>> {
    check_scores(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 {
        return Err(Error::UndefinedMetric { metric: "recall" });
    }
    let order = descending(scores);
    let mut points = Vec::new();
    let (mut tp, mut seen) = (0usize, 0usize);
    for (idx, &k) in order.iter().enumerate() {
        seen += 1;
        if labels[k] {
            tp += 1;
        }
        let last_of_group = idx + 1 == order.len() || scores[order[idx + 1]] != scores[k];
        if last_of_group {
            points.push(PrPoint {
                threshold: scores[k],
                precision: tp as f64 / seen as f64,
                recall: tp as f64 / n_pos as f64,
            });
        }
    }
    Ok(points)
}

/// Fold index per sample.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub folds: Vec<usize>,
}

impl FoldAssignment {
    pub fn len(&self) -> usize {
        self.folds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.folds.is_empty()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.folds {
            sizes[f] += 1;
        }
        sizes
    }

    /// Held-out sample indices of `fold`, ascending.
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] != fold).collect()
    }
}

fn check_kfold(n: usize, k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::invalid("k", format!("need at least 2 folds, got {k}")));
    }
    if n < k {
        return Err(Error::invalid("n", format!("{n} samples cannot fill {k} folds")));
    }
    Ok(())
}

/// Seeded shuffle followed by a round-robin deal into `k` folds.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<FoldAssignment> {
    check_kfold(n, k)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(deal(&order, n, k))
}

/// Like [`kfold_split`] but shuffles each class separately and deals positives
/// first, so every fold gets a near-equal share of both classes.
pub fn kfold_split_stratified(labels: &[bool], k: usize, seed: u64) -> Result<FoldAssignment> {
    check_kfold(labels.len(), k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let mut neg: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    pos.extend(neg);
    Ok(deal(&pos, labels.len(), k))
}

fn deal(order: &[usize], n: usize, k: usize) -> FoldAssignment {
    let mut folds = vec![0; n];
    for (p, &i) in order.iter().enumerate() {
        folds[i] = p % k;
    }
    FoldAssignment { k, folds }
}
