//! Accuracy metrics and comparison reports for pairwise predictions.

use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use thiserror::Error;

use crate::fmt::sig12;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("no predictions to evaluate")]
    EmptyInput,
    #[error("no samples with the positive label")]
    NoPositives,
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("label {0} is not one of the declared classes")]
    UnknownClass(i8),
    #[error("invalid label {0}")]
    InvalidLabel(i8),
}

impl EvalError {
    pub fn code(&self) -> &'static str {
        match self {
            EvalError::EmptyInput => "EMPTY_INPUT",
            EvalError::NoPositives => "NO_POSITIVES",
            EvalError::LengthMismatch { .. } => "LENGTH_MISMATCH",
            EvalError::UnknownClass(_) => "UNKNOWN_CLASS",
            EvalError::InvalidLabel(_) => "INVALID_LABEL",
        }
    }
}

fn check_lengths(pred: &[i8], truth: &[i8]) -> Result<(), EvalError> {
    if truth.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    if pred.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            expected: truth.len(),
            found: pred.len(),
        });
    }
    Ok(())
}

/// Fraction of pairs predicted on the correct side. Truth labels must be -1
/// or +1; a prediction of 0 (an abstention) never matches and counts
/// against accuracy.
pub fn pairwise_accuracy(pred: &[i8], truth: &[i8]) -> Result<f64, EvalError> {
    check_lengths(pred, truth)?;
    if let Some(&bad) = truth.iter().find(|&&t| t != 1 && t != -1) {
        return Err(EvalError::InvalidLabel(bad));
    }
    let correct = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(correct as f64 / truth.len() as f64)
}

/// Of the samples whose truth is `positive`, the fraction predicted as
/// `positive`.
pub fn hit_rate(pred: &[i8], truth: &[i8], positive: i8) -> Result<f64, EvalError> {
    check_lengths(pred, truth)?;
    let mut hits = 0usize;
    let mut total = 0usize;
    for (p, t) in pred.iter().zip(truth) {
        if *t == positive {
            total += 1;
            if *p == positive {
                hits += 1;
            }
        }
    }
    if total == 0 {
        return Err(EvalError::NoPositives);
    }
    Ok(hits as f64 / total as f64)
}

/// Counts of (truth, prediction) combinations over a fixed class list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub classes: Vec<i8>,
    /// `counts[t][p]`: rows are truth, columns are predictions.
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn diagonal(&self) -> u64 {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        self.diagonal() as f64 / self.total() as f64
    }

    pub fn row_total(&self, row: usize) -> u64 {
        self.counts[row].iter().sum()
    }

    /// Header row names the predicted classes; each following row is the
    /// truth class followed by its counts.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["truth".to_string()];
        header.extend(self.classes.iter().map(|c| c.to_string()));
        w.write_record(&header).expect("csv row");
        for (row, class) in self.counts.iter().zip(&self.classes) {
            let mut record = vec![class.to_string()];
            record.extend(row.iter().map(|c| c.to_string()));
            w.write_record(&record).expect("csv row");
        }
        String::from_utf8(w.into_inner().expect("csv flush")).expect("csv output is utf-8")
    }
}

pub fn confusion(pred: &[i8], truth: &[i8], classes: &[i8]) -> Result<ConfusionMatrix, EvalError> {
    check_lengths(pred, truth)?;
    let index_of = |label: i8| {
        classes
            .iter()
            .position(|&c| c == label)
            .ok_or(EvalError::UnknownClass(label))
    };
    let mut counts = vec![vec![0u64; classes.len()]; classes.len()];
    for (p, t) in pred.iter().zip(truth) {
        counts[index_of(*t)?][index_of(*p)?] += 1;
    }
    Ok(ConfusionMatrix {
        classes: classes.to_vec(),
        counts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TieRule {
    /// A tied vote resolves to -1.
    Negative,
    /// A tied vote resolves by one seeded coin flip.
    Seeded(u64),
}

/// Majority of votes, each -1 or +1.
pub fn majority_vote(votes: &[i8], tie: TieRule) -> Result<i8, EvalError> {
    if votes.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    if let Some(&bad) = votes.iter().find(|&&v| v != 1 && v != -1) {
        return Err(EvalError::InvalidLabel(bad));
    }
    let sum: i64 = votes.iter().map(|&v| v as i64).sum();
    Ok(match sum.signum() {
        1 => 1,
        -1 => -1,
        _ => match tie {
            TieRule::Negative => -1,
            TieRule::Seeded(seed) => {
                if StdRng::seed_from_u64(seed).gen_bool(0.5) {
                    1
                } else {
                    -1
                }
            }
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub n: usize,
    pub accuracy: f64,
    /// Hit rate on the +1 class.
    pub hit_rate: f64,
    /// Accuracy per condition tag, when tags were supplied.
    pub per_condition: BTreeMap<String, f64>,
}

/// Overall accuracy and +1 hit rate, with an optional per-condition
/// accuracy breakdown from a parallel tag per sample.
pub fn evaluate_predictions(
    pred: &[i8],
    truth: &[i8],
    conditions: Option<&[String]>,
) -> Result<EvalReport, EvalError> {
    let accuracy = pairwise_accuracy(pred, truth)?;
    let hit_rate = hit_rate(pred, truth, 1)?;
    let mut per_condition = BTreeMap::new();
    if let Some(tags) = conditions {
        if tags.len() != truth.len() {
            return Err(EvalError::LengthMismatch {
                expected: truth.len(),
                found: tags.len(),
            });
        }
        let mut grouped: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for ((p, t), tag) in pred.iter().zip(truth).zip(tags) {
            let entry = grouped.entry(tag).or_default();
            entry.1 += 1;
            if p == t {
                entry.0 += 1;
            }
        }
        per_condition = grouped
            .into_iter()
            .map(|(tag, (correct, total))| (tag.to_string(), correct as f64 / total as f64))
            .collect();
    }
    Ok(EvalReport {
        n: truth.len(),
        accuracy,
        hit_rate,
        per_condition,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub method: String,
    pub dataset: String,
    pub n: usize,
    pub accuracy: f64,
}

/// `method,dataset,n,accuracy` rows in the order given.
pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record([
            row.method.as_str(),
            &row.dataset,
            &row.n.to_string(),
            &sig12(row.accuracy),
        ])
        .expect("csv row");
    }
    String::from_utf8(w.into_inner().expect("csv flush")).expect("csv output is utf-8")
}

/// The same comparison as an aligned text table for terminals.
pub fn comparison_table(rows: &[ComparisonRow]) -> String {
    let headers = ["method", "dataset", "n", "accuracy"];
    let cells: Vec<[String; 4]> = rows
        .iter()
        .map(|r| {
            [
                r.method.clone(),
                r.dataset.clone(),
                r.n.to_string(),
                format!("{:.4}", r.accuracy),
            ]
        })
        .collect();
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in &cells {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let emit = |out: &mut String, row: &[String]| {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell:<w$}"))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    };
    emit(&mut out, &headers.map(String::from));
    for row in &cells {
        emit(&mut out, row);
    }
    out
}
