//! Window-overlap precision, recall and F1.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl std::ops::Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        ConfusionCounts {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
        }
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |a, b| a + b)
    }
}

/// Closed intervals `[a0, a1]` and `[b0, b1]` share at least one point.
pub fn overlaps(a: (i64, i64), b: (i64, i64)) -> bool {
    a.0 <= b.1 && b.0 <= a.1
}

/// One TP per truth window overlapping any prediction, one FN per truth
/// window overlapping none, one FP per prediction overlapping no truth window.
pub fn confusion(truth: &[(i64, i64)], pred: &[(i64, i64)]) -> ConfusionCounts {
    let tp = truth.iter().filter(|&&t| pred.iter().any(|&p| overlaps(t, p))).count();
    let fp = pred.iter().filter(|&&p| !truth.iter().any(|&t| overlaps(t, p))).count();
    ConfusionCounts {
        tp,
        fp,
        fn_: truth.len() - tp,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1; every zero denominator yields 0.
pub fn prf1(c: &ConfusionCounts) -> Scores {
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Scores { precision, recall, f1 }
}

/// Result of one signal under one scoring variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalResult {
    pub dataset: String,
    pub signal: String,
    pub variant: String,
    pub counts: ConfusionCounts,
    pub scores: Scores,
}

/// Per-dataset aggregate: micro (pooled counts) and macro (mean of
/// per-signal F1) scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub dataset: String,
    pub variant: String,
    pub signals: usize,
    pub failed: usize,
    pub counts: ConfusionCounts,
    pub micro: Scores,
    pub macro_f1: f64,
}

pub fn summarize(dataset: &str, variant: &str, results: &[&SignalResult], failed: usize) -> DatasetReport {
    let counts: ConfusionCounts = results.iter().map(|r| r.counts).sum();
    let macro_f1 = if results.is_empty() {
        0.0
    } else {
        results.iter().map(|r| r.scores.f1).sum::<f64>() / results.len() as f64
    };
    DatasetReport {
        dataset: dataset.to_string(),
        variant: variant.to_string(),
        signals: results.len(),
        failed,
        counts,
        micro: prf1(&counts),
        macro_f1,
    }
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
