//! Shared test corpora and independent reference implementations.
//!
//! The oracles in [`oracles`] recompute pipeline quantities from first
//! principles with none of the production code paths, so tests can compare
//! two implementations that share only the input data.

use std::path::PathBuf;

use viral_core::ingest::{parse_submissions, SubmissionFormat};
use viral_core::model::{validate_corpus, Corpus, Submission};

pub mod oracles;

/// Twelve submissions across four images and two categories. Image h3 is
/// resubmitted often with unremarkable single-post scores while h2 has one
/// huge post, so the virality and popularity orderings reverse.
pub const SUBMISSIONS_12: &str = include_str!("../fixtures/submissions_12.jsonl");

/// Frozen score table for [`SUBMISSIONS_12`], cross-checked against an
/// independent implementation before freezing.
pub const GOLDEN_SCORES_12: &str = include_str!("../fixtures/golden/scores_12.csv");

pub fn submissions_12() -> Vec<Submission> {
    let (subs, report) = parse_submissions(SUBMISSIONS_12.as_bytes(), SubmissionFormat::Jsonl)
        .expect("bundled fixture parses");
    assert_eq!(report.records_rejected, 0, "bundled fixture has no bad rows");
    subs
}

/// The bundled corpus with no category filtering.
pub fn corpus_12() -> Corpus {
    validate_corpus(&submissions_12(), 1).expect("bundled fixture validates")
}

/// Path of the bundled submissions file, for driving binaries.
pub fn submissions_12_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/submissions_12.jsonl")
}

/// Path of the frozen score table.
pub fn golden_scores_12_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/golden/scores_12.csv")
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let n = ra.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        num += (x - ma) * (y - mb);
        da += (x - ma) * (x - ma);
        db += (y - mb) * (y - mb);
    }
    if da == 0.0 || db == 0.0 {
        return 0.0;
    }
    num / (da * db).sqrt()
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("finite values"));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}
