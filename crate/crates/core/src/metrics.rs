// SPDX-License-Identifier: Apache-2.0
//! Binary classification metrics. Class 1 is the positive (seizure) class.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Predicted class: index of the larger logit, class 0 on ties.
pub fn argmax2(logits: &[f64]) -> u8 {
    u8::from(logits.len() > 1 && logits[1] > logits[0])
}

/// Score used for ranking: `logit1 - logit0`.
pub fn score(logits: &[f64]) -> f64 {
    logits.get(1).copied().unwrap_or(0.0) - logits.first().copied().unwrap_or(0.0)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn from_predictions(pred: &[u8], labels: &[u8]) -> Self {
        let mut c = Self::default();
        for (&p, &y) in pred.iter().zip(labels) {
            match (p, y) {
                (1, 1) => c.tp += 1,
                (0, 0) => c.tn += 1,
                (1, _) => c.fp += 1,
                _ => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }
}

fn ratio(a: usize, b: usize) -> Option<f64> {
    (b > 0).then(|| a as f64 / b as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub samples: usize,
    pub confusion: Confusion,
    pub accuracy: f64,
    /// `None` when a class is absent.
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    /// False positives divided by the recording duration, when given.
    pub fp_per_hour: Option<f64>,
    pub auroc: Option<f64>,
}

/// Area under the ROC curve via the Mann-Whitney statistic; ties count half.
pub fn auroc(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    // average ranks over tied groups
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        rank_sum_pos += avg * idx[i..=j].iter().filter(|&&k| labels[k] == 1).count() as f64;
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos * n_neg) as f64)
}

pub fn evaluate(logits: &[Vec<f64>], labels: &[u8], hours: Option<f64>) -> Result<Metrics> {
    if logits.is_empty() {
        return Err(Error::EmptyEvaluationSet);
    }
    if logits.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            context: "labels".into(),
            expected: format!("{}", logits.len()),
            actual: format!("{}", labels.len()),
        });
    }
    let pred: Vec<u8> = logits.iter().map(|l| argmax2(l)).collect();
    let c = Confusion::from_predictions(&pred, labels);
    let scores: Vec<f64> = logits.iter().map(|l| score(l)).collect();
    Ok(Metrics {
        samples: labels.len(),
        confusion: c,
        accuracy: (c.tp + c.tn) as f64 / c.total() as f64,
        sensitivity: ratio(c.tp, c.tp + c.fn_),
        specificity: ratio(c.tn, c.tn + c.fp),
        fp_per_hour: hours.filter(|h| *h > 0.0).map(|h| c.fp as f64 / h),
        auroc: auroc(&scores, labels),
    })
}
