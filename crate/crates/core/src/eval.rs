//! Classification metrics: confusion matrix, per-class precision/recall/F1
//! and macro F1. A zero denominator yields 0 for that quantity.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// `confusion[gold][pred]` counts.
pub fn confusion_matrix(gold: &[usize], pred: &[usize], n_classes: usize) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0; n_classes]; n_classes];
    for (&g, &p) in gold.iter().zip(pred) {
        m[g][p] += 1;
    }
    m
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn class_metrics(confusion: &[Vec<usize>]) -> Vec<ClassMetrics> {
    let n = confusion.len();
    (0..n)
        .map(|c| {
            let tp = confusion[c][c];
            let support: usize = confusion[c].iter().sum();
            let predicted: usize = confusion.iter().map(|row| row[c]).sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics {
                precision,
                recall,
                f1,
                support,
            }
        })
        .collect()
}

/// Macro F1 over class indices in `0..n_classes`.
pub fn macro_f1_indices(gold: &[usize], pred: &[usize], n_classes: usize) -> Result<f64> {
    check_lengths(gold.len(), pred.len())?;
    if let Some(&bad) = gold.iter().chain(pred).find(|&&c| c >= n_classes) {
        return Err(Error::UnknownLabel(bad.to_string()));
    }
    let per_class = class_metrics(&confusion_matrix(gold, pred, n_classes));
    Ok(per_class.iter().map(|m| m.f1).sum::<f64>() / n_classes as f64)
}

fn check_lengths(gold: usize, pred: usize) -> Result<()> {
    if gold != pred {
        return Err(Error::Arity(format!(
            "{gold} gold labels, {pred} predictions"
        )));
    }
    if gold == 0 {
        return Err(Error::InvalidArgument("no labels to score".into()));
    }
    Ok(())
}

fn to_indices<S: AsRef<str>>(labels: &[S], index: &HashMap<&str, usize>) -> Result<Vec<usize>> {
    labels
        .iter()
        .map(|l| {
            index
                .get(l.as_ref())
                .copied()
                .ok_or_else(|| Error::UnknownLabel(l.as_ref().to_string()))
        })
        .collect()
}

/// Unweighted mean of per-class F1 over `classes`.
pub fn macro_f1<S: AsRef<str>>(gold: &[S], pred: &[S], classes: &[S]) -> Result<f64> {
    check_lengths(gold.len(), pred.len())?;
    let index: HashMap<&str, usize> = classes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_ref(), i))
        .collect();
    let g = to_indices(gold, &index)?;
    let p = to_indices(pred, &index)?;
    macro_f1_indices(&g, &p, classes.len())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub seed: u64,
    pub validation_fraction: f64,
    pub feature_set: String,
    pub n_features: usize,
    pub model_hash: String,
    pub split: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub macro_f1: f64,
    pub accuracy: f64,
    pub n_documents: usize,
    pub classes: Vec<String>,
    pub per_class: BTreeMap<String, ClassMetrics>,
    pub confusion: Vec<Vec<usize>>,
    pub metadata: ReportMetadata,
}

impl EvalReport {
    pub fn from_indices(
        gold: &[usize],
        pred: &[usize],
        classes: &[String],
        metadata: ReportMetadata,
    ) -> Result<EvalReport> {
        let macro_f1 = macro_f1_indices(gold, pred, classes.len())?;
        let confusion = confusion_matrix(gold, pred, classes.len());
        let correct: usize = (0..classes.len()).map(|c| confusion[c][c]).sum();
        let per_class = classes
            .iter()
            .cloned()
            .zip(class_metrics(&confusion))
            .collect();
        Ok(EvalReport {
            macro_f1,
            accuracy: correct as f64 / gold.len() as f64,
            n_documents: gold.len(),
            classes: classes.to_vec(),
            per_class,
            confusion,
            metadata,
        })
    }

    pub fn from_labels<S: AsRef<str>>(
        gold: &[S],
        pred: &[S],
        classes: &[String],
        metadata: ReportMetadata,
    ) -> Result<EvalReport> {
        check_lengths(gold.len(), pred.len())?;
        let index: HashMap<&str, usize> = classes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect();
        let g = to_indices(gold, &index)?;
        let p = to_indices(pred, &index)?;
        Self::from_indices(&g, &p, classes, metadata)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let m = &self.metadata;
        let _ = writeln!(out, "split: {}", m.split);
        let _ = writeln!(out, "documents: {}", self.n_documents);
        let _ = writeln!(out, "macro F1: {:.4}", self.macro_f1);
        let _ = writeln!(out, "accuracy: {:.4}", self.accuracy);
        let _ = writeln!(
            out,
            "feature set: {} ({} features), seed {}",
            m.feature_set, m.n_features, m.seed
        );
        let width = self
            .classes
            .iter()
            .map(String::len)
            .max()
            .unwrap_or(5)
            .max(5);
        let _ = writeln!(
            out,
            "\n{:<width$}  precision  recall     f1  support",
            "class"
        );
        for (class, cm) in &self.per_class {
            let _ = writeln!(
                out,
                "{class:<width$}  {:>9.4}  {:>6.4}  {:>5.4}  {:>7}",
                cm.precision, cm.recall, cm.f1, cm.support
            );
        }
        let _ = writeln!(out, "\nconfusion (rows gold, columns predicted):");
        for (class, row) in self.classes.iter().zip(&self.confusion) {
            let cells: Vec<String> = row.iter().map(|c| format!("{c:>6}")).collect();
            let _ = writeln!(out, "{class:<width$} {}", cells.join(""));
        }
        out
    }
}
