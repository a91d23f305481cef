//! Classification metrics: accuracy, ROC AUC (binary and macro
//! one-vs-rest), confusion matrix and per-class precision/recall.

use std::fmt;

use log::warn;
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::argmax_rows;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("no samples")]
    Empty,
    #[error("{a} labels vs {b} predictions")]
    LengthMismatch { a: usize, b: usize },
    #[error("AUC is undefined when only one class is present")]
    SingleClass,
    #[error("score {0} is not a number")]
    NanScore(usize),
    #[error("label {label} outside {n_classes} classes")]
    BadLabel { label: usize, n_classes: usize },
}

pub type Result<T, E = EvalError> = std::result::Result<T, E>;

fn same_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(EvalError::LengthMismatch { a, b });
    }
    if a == 0 {
        return Err(EvalError::Empty);
    }
    Ok(())
}

pub fn accuracy(y_true: &[usize], y_pred: &[usize]) -> Result<f64> {
    same_len(y_true.len(), y_pred.len())?;
    let hits = y_true.iter().zip(y_pred).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / y_true.len() as f64)
}

/// Mann–Whitney form of the ROC AUC: the fraction of (positive, negative)
/// pairs ranked correctly, ties counting one half. O(n log n).
pub fn roc_auc_binary(positive: &[bool], scores: &[f64]) -> Result<f64> {
    same_len(positive.len(), scores.len())?;
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(EvalError::NanScore(i));
    }
    let n_pos = positive.iter().filter(|&&p| p).count() as u64;
    let n_neg = positive.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let (mut concordant, mut tied, mut neg_below) = (0u64, 0u64, 0u64);
    let mut start = 0;
    while start < idx.len() {
        let mut end = start;
        while end < idx.len() && scores[idx[end]] == scores[idx[start]] {
            end += 1;
        }
        let pos = idx[start..end].iter().filter(|&&i| positive[i]).count() as u64;
        let neg = (end - start) as u64 - pos;
        concordant += pos * neg_below;
        tied += pos * neg;
        neg_below += neg;
        start = end;
    }
    Ok((concordant as f64 + 0.5 * tied as f64) / (n_pos * n_neg) as f64)
}

/// Unweighted mean of one-vs-rest AUCs over the classes present in
/// `y_true`. With two columns this is the AUC of column 1.
pub fn roc_auc_macro(y_true: &[usize], probs: ArrayView2<'_, f64>) -> Result<f64> {
    same_len(y_true.len(), probs.nrows())?;
    let c = probs.ncols();
    if let Some(&label) = y_true.iter().find(|&&y| y >= c) {
        return Err(EvalError::BadLabel { label, n_classes: c });
    }
    if c == 2 {
        let pos: Vec<bool> = y_true.iter().map(|&y| y == 1).collect();
        return roc_auc_binary(&pos, &probs.column(1).to_vec());
    }
    let mut aucs = Vec::new();
    for k in 0..c {
        let pos: Vec<bool> = y_true.iter().map(|&y| y == k).collect();
        if !pos.contains(&true) {
            warn!("class {k} absent from labels; skipped in macro AUC");
            continue;
        }
        aucs.push(roc_auc_binary(&pos, &probs.column(k).to_vec())?);
    }
    if aucs.len() < 2 {
        return Err(EvalError::SingleClass);
    }
    Ok(aucs.iter().sum::<f64>() / aucs.len() as f64)
}

/// `cm[[t, p]]` counts samples of true class `t` predicted as `p`.
pub fn confusion_matrix(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<Array2<usize>> {
    same_len(y_true.len(), y_pred.len())?;
    let mut cm = Array2::zeros((n_classes, n_classes));
    for (&t, &p) in y_true.iter().zip(y_pred) {
        for label in [t, p] {
            if label >= n_classes {
                return Err(EvalError::BadLabel { label, n_classes });
            }
        }
        cm[[t, p]] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub accuracy: f64,
    pub auc: f64,
    /// Zero for a class that is never predicted.
    pub precision: Vec<f64>,
    /// Zero for a class absent from the labels.
    pub recall: Vec<f64>,
    pub confusion: Vec<Vec<usize>>,
}

impl MetricReport {
    /// Scores class-probability rows (one column per class) against labels;
    /// the predicted class is the row argmax.
    pub fn from_probabilities(y_true: &[usize], probs: ArrayView2<'_, f64>) -> Result<Self> {
        let pred = argmax_rows(probs);
        let c = probs.ncols();
        let cm = confusion_matrix(y_true, &pred, c)?;
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        Ok(Self {
            accuracy: accuracy(y_true, &pred)?,
            auc: roc_auc_macro(y_true, probs)?,
            precision: (0..c).map(|k| ratio(cm[[k, k]], cm.column(k).sum())).collect(),
            recall: (0..c).map(|k| ratio(cm[[k, k]], cm.row(k).sum())).collect(),
            confusion: cm.rows().into_iter().map(|r| r.to_vec()).collect(),
        })
    }
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "accuracy  {:.4}", self.accuracy)?;
        writeln!(f, "auc       {:.4}", self.auc)?;
        for (k, (p, r)) in self.precision.iter().zip(&self.recall).enumerate() {
            writeln!(f, "class {k}: precision {p:.4} recall {r:.4}")?;
        }
        writeln!(f, "confusion (rows = true class):")?;
        for row in &self.confusion {
            let cells: Vec<String> = row.iter().map(|c| format!("{c:>5}")).collect();
            writeln!(f, "{}", cells.join(""))?;
        }
        Ok(())
    }
}
