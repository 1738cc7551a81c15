//! Classification metrics, the F1-best threshold sweep and the forecast
//! error used for count predictions.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mann-Whitney AUC: the fraction of (positive, negative) pairs ranked
/// correctly, ties counted as one half. Computed by sorting in O(n log n).
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::DegenerateAuc);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // walk tie groups in ascending order, counting negatives strictly below
    let mut credit = 0.0f64;
    let mut neg_below = 0usize;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]].total_cmp(&scores[order[i]]) == Ordering::Equal {
            j += 1;
        }
        let group = &order[i..j];
        let gp = group.iter().filter(|&&k| labels[k]).count();
        let gn = group.len() - gp;
        credit += (gp * neg_below) as f64 + 0.5 * (gp * gn) as f64;
        neg_below += gn;
        i = j;
    }
    Ok(credit / (pos as f64 * neg as f64))
}

/// Precision/recall/F1 with confusion counts at one threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ThresholdPoint {
    fn from_counts(threshold: f64, tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ThresholdPoint {
            threshold,
            precision,
            recall,
            f1,
            tp,
            fp,
            tn,
            fn_,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Predicts positive iff `score >= threshold`. Zero denominators yield 0.
pub fn prf(scores: &[f64], labels: &[bool], threshold: f64) -> ThresholdPoint {
    assert_eq!(scores.len(), labels.len(), "scores and labels differ in length");
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    ThresholdPoint::from_counts(threshold, tp, fp, tn, fn_)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Sweep {
    pub f1_best: f64,
    pub best_threshold: f64,
    /// One point per distinct score, ascending.
    pub grid: Vec<ThresholdPoint>,
}

/// Evaluates every distinct score as a threshold and returns the best F1
/// together with the smallest threshold attaining it. Thresholds between
/// distinct scores cannot change the confusion counts, so this is exact.
/// The lowest score already predicts everything positive; an empty input
/// yields F1 0 at `-inf`.
pub fn f1_best_sweep(scores: &[f64], labels: &[bool]) -> F1Sweep {
    assert_eq!(scores.len(), labels.len(), "scores and labels differ in length");
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    // descending sweep: after consuming a tie group everything >= its score is positive
    let (mut tp, mut fp) = (0, 0);
    let mut grid = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        grid.push(ThresholdPoint::from_counts(t, tp, fp, neg - fp, pos - tp));
    }
    grid.reverse();
    let mut best = ThresholdPoint::from_counts(f64::NEG_INFINITY, pos, neg, 0, 0);
    if let Some(first) = grid.first() {
        best = *first;
    }
    for p in &grid {
        if p.f1 > best.f1 {
            best = *p;
        }
    }
    F1Sweep {
        f1_best: best.f1,
        best_threshold: best.threshold,
        grid,
    }
}

/// Mean over days of `|predicted - actual| / actual`.
pub fn apme(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} actual values",
            predicted.len(),
            actual.len()
        )));
    }
    if actual.is_empty() {
        return Err(Error::InvalidParameter("APME needs at least one day".into()));
    }
    if let Some(a) = actual.iter().find(|&&a| !(a > 0.0)) {
        return Err(Error::InvalidParameter(format!("actual count {a} must be positive")));
    }
    Ok(predicted
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a).abs() / a)
        .sum::<f64>()
        / actual.len() as f64)
}

fn check_lengths(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    Ok(())
}

/// Fixed decision threshold used for the headline precision/recall/F1.
pub const FIXED_THRESHOLD: f64 = 0.5;

/// Metrics for one scored split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub count: usize,
    pub positives: usize,
    /// `None` when the split holds a single class.
    pub auc: Option<f64>,
    pub at_fixed: ThresholdPoint,
    pub f1_best: f64,
    pub at_best: ThresholdPoint,
    pub grid: Vec<ThresholdPoint>,
    /// Mean loss of the scored rows, when the caller computed one.
    pub loss: Option<f64>,
    /// APME per forecast horizon (index 0 = one step ahead).
    pub apme: Option<Vec<f64>>,
}

/// Column order of [`EvalReport::csv_row`].
pub const REPORT_CSV_COLUMNS: [&str; 14] = [
    "count",
    "positives",
    "auc",
    "precision",
    "recall",
    "f1",
    "f1_best",
    "best_threshold",
    "best_precision",
    "best_recall",
    "tp",
    "fp",
    "tn",
    "fn",
];

impl EvalReport {
    pub fn from_scores(scores: &[f64], labels: &[bool]) -> Result<Self> {
        check_lengths(scores, labels)?;
        let auc = match auc(scores, labels) {
            Ok(a) => Some(a),
            Err(Error::DegenerateAuc) => None,
            Err(e) => return Err(e),
        };
        let sweep = f1_best_sweep(scores, labels);
        let at_best = sweep
            .grid
            .iter()
            .find(|p| p.threshold == sweep.best_threshold)
            .copied()
            .unwrap_or_else(|| prf(scores, labels, sweep.best_threshold));
        Ok(EvalReport {
            count: scores.len(),
            positives: labels.iter().filter(|&&l| l).count(),
            auc,
            at_fixed: prf(scores, labels, FIXED_THRESHOLD),
            f1_best: sweep.f1_best,
            at_best,
            grid: sweep.grid,
            loss: None,
            apme: None,
        })
    }

    /// One CSV row in [`REPORT_CSV_COLUMNS`] order; undefined AUC is empty.
    pub fn csv_row(&self) -> String {
        let auc = self.auc.map(|a| a.to_string()).unwrap_or_default();
        let f = &self.at_fixed;
        [
            self.count.to_string(),
            self.positives.to_string(),
            auc,
            f.precision.to_string(),
            f.recall.to_string(),
            f.f1.to_string(),
            self.f1_best.to_string(),
            self.at_best.threshold.to_string(),
            self.at_best.precision.to_string(),
            self.at_best.recall.to_string(),
            f.tp.to_string(),
            f.fp.to_string(),
            f.tn.to_string(),
            f.fn_.to_string(),
        ]
        .join(",")
    }

    /// Flat JSON object: scalars at the top level, the threshold grid as
    /// parallel arrays.
    pub fn to_flat_json(&self) -> serde_json::Value {
        use serde_json::json;
        let col = |f: fn(&ThresholdPoint) -> serde_json::Value| -> Vec<serde_json::Value> {
            self.grid.iter().map(f).collect()
        };
        json!({
            "count": self.count,
            "positives": self.positives,
            "auc": self.auc,
            "threshold": self.at_fixed.threshold,
            "precision": self.at_fixed.precision,
            "recall": self.at_fixed.recall,
            "f1": self.at_fixed.f1,
            "tp": self.at_fixed.tp,
            "fp": self.at_fixed.fp,
            "tn": self.at_fixed.tn,
            "fn": self.at_fixed.fn_,
            "f1_best": self.f1_best,
            "best_threshold": finite_or_null(self.at_best.threshold),
            "best_precision": self.at_best.precision,
            "best_recall": self.at_best.recall,
            "best_tp": self.at_best.tp,
            "best_fp": self.at_best.fp,
            "best_tn": self.at_best.tn,
            "best_fn": self.at_best.fn_,
            "loss": self.loss,
            "apme": self.apme,
            "grid_threshold": col(|p| p.threshold.into()),
            "grid_precision": col(|p| p.precision.into()),
            "grid_recall": col(|p| p.recall.into()),
            "grid_f1": col(|p| p.f1.into()),
        })
    }
}

fn finite_or_null(x: f64) -> serde_json::Value {
    if x.is_finite() {
        x.into()
    } else {
        serde_json::Value::Null
    }
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation: Pearson correlation of average ranks.
/// `None` when either input is constant or shorter than two.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("{} values against {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Ok(None);
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let mean = (x.len() as f64 + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mean) * (b - mean);
        sxx += (a - mean).powi(2);
        syy += (b - mean).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(None);
    }
    Ok(Some(sxy / (sxx * syy).sqrt()))
}
