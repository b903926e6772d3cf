//! Reference implementations built from first principles.
//!
//! Each oracle recomputes its answer with plain nested loops and its own
//! arithmetic, sharing only data types with the library. Tests compare the
//! two implementations; agreement is evidence, divergence is a bug in one
//! of them.

use std::collections::{BTreeMap, BTreeSet};

use viral_core::attributes::{AttributeMatrix, ComboMode};
use viral_core::model::{Corpus, Direction, ImageId, SignedAttribute};

/// Virality per image, recomputed from the corpus submissions alone: offset
/// from the most negative raw score, per (category, hour) mean baselines,
/// best normalized score per image, times the log of its resubmission count
/// over the corpus mean.
pub fn oracle_virality(corpus: &Corpus) -> BTreeMap<ImageId, f64> {
    let mut min_raw = i64::MAX;
    for record in corpus.images.values() {
        for s in &record.submissions {
            min_raw = min_raw.min(s.ups as i64 - s.downs as i64);
        }
    }
    let offset = if min_raw < 0 { -min_raw } else { 0 };

    let mut sums: BTreeMap<(&str, u64), (f64, usize)> = BTreeMap::new();
    let mut total_submissions = 0usize;
    for record in corpus.images.values() {
        for s in &record.submissions {
            let cell = sums.entry((s.category.as_str(), s.hour_bucket)).or_insert((0.0, 0));
            cell.0 += (s.ups as i64 - s.downs as i64 + offset) as f64;
            cell.1 += 1;
            total_submissions += 1;
        }
    }
    let mean_resubmissions = total_submissions as f64 / corpus.images.len() as f64;

    let mut out = BTreeMap::new();
    for (id, record) in &corpus.images {
        let mut best = 0.0f64;
        for s in &record.submissions {
            let (sum, count) = sums[&(s.category.as_str(), s.hour_bucket)];
            let baseline = sum / count as f64;
            let normalized = if baseline == 0.0 {
                0.0
            } else {
                (s.ups as i64 - s.downs as i64 + offset) as f64 / baseline
            };
            best = best.max(normalized);
        }
        let m = record.submissions.len() as f64;
        out.insert(id.clone(), best * (m / mean_resubmissions).ln());
    }
    out
}

fn oracle_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut dx = 0.0;
    let mut dy = 0.0;
    for (a, b) in x.iter().zip(y) {
        num += (a - mx) * (b - my);
        dx += (a - mx) * (a - mx);
        dy += (b - my) * (b - my);
    }
    if dx == 0.0 || dy == 0.0 {
        return 0.0;
    }
    num / (dx * dy).sqrt()
}

fn oracle_combo_scores(
    matrix: &AttributeMatrix,
    combo: &[(usize, i32)],
    mode: ComboMode,
) -> Vec<f64> {
    (0..matrix.n_pairs())
        .map(|row| {
            let votes = combo.iter().map(|&(col, sign)| matrix.entry(row, col) as i32 * sign);
            let score = match mode {
                ComboMode::Sum => votes.sum(),
                ComboMode::Force => {
                    let mut picked = 0;
                    for v in votes {
                        if v != 0 {
                            picked = v;
                            break;
                        }
                    }
                    picked
                }
            };
            score as f64
        })
        .collect()
}

/// The signed attribute a greedy step should add to `combo`, with the
/// correlation of the extended combo: exhaustive scan of every unused,
/// non-excluded attribute in both directions; ties prefer higher
/// correlation, then UP over DOWN, then the earlier name. None when no
/// candidate exists.
pub fn oracle_greedy_step(
    matrix: &AttributeMatrix,
    combo: &[SignedAttribute],
    mode: ComboMode,
    exclusions: &BTreeSet<String>,
) -> Option<(SignedAttribute, f64)> {
    let labels: Vec<f64> = matrix.labels().iter().map(|&l| l as f64).collect();
    let used: BTreeSet<&str> = combo.iter().map(|sa| sa.attribute.as_str()).collect();
    let base: Vec<(usize, i32)> = combo
        .iter()
        .map(|sa| {
            (
                matrix
                    .attribute_index(&sa.attribute)
                    .expect("combo attribute exists"),
                match sa.direction {
                    Direction::Up => 1,
                    Direction::Down => -1,
                },
            )
        })
        .collect();

    let mut best: Option<(SignedAttribute, f64)> = None;
    for (col, attribute) in matrix.attributes().iter().enumerate() {
        if used.contains(attribute.as_str()) || exclusions.contains(attribute) {
            continue;
        }
        for (direction, sign) in [(Direction::Up, 1), (Direction::Down, -1)] {
            let mut extended = base.clone();
            extended.push((col, sign));
            let scores = oracle_combo_scores(matrix, &extended, mode);
            let corr = oracle_pearson(&scores, &labels);
            let candidate = SignedAttribute {
                attribute: attribute.clone(),
                direction,
            };
            let replace = match &best {
                None => true,
                Some((b_sa, b_corr)) => {
                    corr > *b_corr
                        || (corr == *b_corr
                            && (direction, &candidate.attribute)
                                < (b_sa.direction, &b_sa.attribute))
                }
            };
            if replace {
                best = Some((candidate, corr));
            }
        }
    }
    best
}

/// The `rank`-th nearest image to `target` by squared Euclidean distance
/// (1-based), ties broken by the smaller id; `excluded` ids and the target
/// itself are never candidates.
pub fn oracle_knn(
    features: &BTreeMap<ImageId, Vec<f64>>,
    target: &str,
    excluded: &BTreeSet<ImageId>,
    rank: usize,
) -> Option<ImageId> {
    let target_features = &features[target];
    let mut candidates: Vec<(f64, &ImageId)> = features
        .iter()
        .filter(|(id, _)| id.as_str() != target && !excluded.contains(*id))
        .map(|(id, f)| {
            let d: f64 = target_features
                .iter()
                .zip(f)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (d, id)
        })
        .collect();
    candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite distance").then(a.1.cmp(b.1)));
    candidates.get(rank - 1).map(|(_, id)| (*id).clone())
}
