//! Relative-attribute analysis over labeled image pairs.
//!
//! Workers vote per (pair, attribute): +1 when the more viral member of the
//! pair shows more of the attribute, -1 when less, 0 when equal. Votes are
//! majority-aggregated into an [`AttributeMatrix`]; columns are correlated
//! against the pair labels; and [`greedy_select`] searches for the signed
//! attribute combination whose combined vote best tracks virality.

use std::collections::{BTreeMap, BTreeSet};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use thiserror::Error;

use crate::fmt::sig12;
use crate::model::{AttributeAnnotation, Direction, PairId, PairLabel, SignedAttribute};

#[derive(Debug, Error, PartialEq)]
pub enum AttributeError {
    #[error("annotation references unknown pair {0:?}")]
    UnknownPair(PairId),
    #[error("unknown attribute {0:?}")]
    UnknownAttribute(String),
    #[error("no attributes remain after exclusions")]
    NoAttributes,
    #[error("seed attribute {0:?} is excluded")]
    SeedExcluded(String),
    #[error("bad options: {0}")]
    BadOptions(String),
}

impl AttributeError {
    pub fn code(&self) -> &'static str {
        match self {
            AttributeError::UnknownPair(_) => "UNKNOWN_PAIR",
            AttributeError::UnknownAttribute(_) => "UNKNOWN_ATTRIBUTE",
            AttributeError::NoAttributes => "NO_ATTRIBUTES",
            AttributeError::SeedExcluded(_) => "SEED_EXCLUDED",
            AttributeError::BadOptions(_) => "BAD_OPTIONS",
        }
    }
}

/// Majority-voted attribute entries per pair. Rows follow the pair order the
/// matrix was built from; columns are attribute names in sorted order.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeMatrix {
    pair_ids: Vec<PairId>,
    labels: Vec<i8>,
    attributes: Vec<String>,
    entries: Vec<Vec<i8>>,
    coverage_gaps: usize,
}

impl AttributeMatrix {
    pub fn n_pairs(&self) -> usize {
        self.pair_ids.len()
    }

    pub fn n_attributes(&self) -> usize {
        self.attributes.len()
    }

    pub fn pair_ids(&self) -> &[PairId] {
        &self.pair_ids
    }

    /// Pair labels, one per row, each -1 or +1.
    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn attribute_index(&self, attribute: &str) -> Option<usize> {
        self.attributes
            .binary_search_by(|a| a.as_str().cmp(attribute))
            .ok()
    }

    pub fn entry(&self, row: usize, column: usize) -> i8 {
        self.entries[row][column]
    }

    pub fn column(&self, attribute: &str) -> Result<Vec<i8>, AttributeError> {
        let idx = self
            .attribute_index(attribute)
            .ok_or_else(|| AttributeError::UnknownAttribute(attribute.to_string()))?;
        Ok(self.entries.iter().map(|row| row[idx]).collect())
    }

    /// (pair, attribute) cells that received no annotations at all and were
    /// defaulted to 0.
    pub fn coverage_gaps(&self) -> usize {
        self.coverage_gaps
    }
}

/// Majority-votes annotations into a matrix over the given pairs.
///
/// Every annotated attribute becomes a column covering every pair; a cell is
/// sign(upvotes - downvotes) over its annotations, 0 on ties, and 0 (counted
/// as a coverage gap) when nothing was annotated. Annotations for pairs
/// outside `pairs` are a data error.
pub fn aggregate_annotations(
    annotations: &[AttributeAnnotation],
    pairs: &[PairLabel],
) -> Result<AttributeMatrix, AttributeError> {
    let row_of: BTreeMap<&str, usize> = pairs
        .iter()
        .enumerate()
        .map(|(i, p)| (p.pair_id.as_str(), i))
        .collect();
    let attributes: Vec<String> = annotations
        .iter()
        .map(|a| a.attribute.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let col_of: BTreeMap<&str, usize> = attributes
        .iter()
        .enumerate()
        .map(|(i, a)| (a.as_str(), i))
        .collect();

    // (plus, minus, any) vote counts per cell.
    let mut counts = vec![vec![(0u32, 0u32, false); attributes.len()]; pairs.len()];
    for a in annotations {
        let &row = row_of
            .get(a.pair_id.as_str())
            .ok_or_else(|| AttributeError::UnknownPair(a.pair_id.clone()))?;
        let cell = &mut counts[row][col_of[a.attribute.as_str()]];
        match a.label {
            1 => cell.0 += 1,
            -1 => cell.1 += 1,
            _ => {}
        }
        cell.2 = true;
    }

    let mut coverage_gaps = 0;
    let entries: Vec<Vec<i8>> = counts
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|(plus, minus, any)| {
                    if !any {
                        coverage_gaps += 1;
                    }
                    match plus.cmp(&minus) {
                        std::cmp::Ordering::Greater => 1,
                        std::cmp::Ordering::Less => -1,
                        std::cmp::Ordering::Equal => 0,
                    }
                })
                .collect()
        })
        .collect();

    Ok(AttributeMatrix {
        pair_ids: pairs.iter().map(|p| p.pair_id.clone()).collect(),
        labels: pairs.iter().map(|p| p.label).collect(),
        attributes,
        entries,
        coverage_gaps,
    })
}

/// A correlation that may be undefined (a constant column has no variance);
/// undefined correlations carry value 0 so they sort and print harmlessly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub value: f64,
    pub defined: bool,
}

fn pearson(x: &[f64], y: &[f64]) -> Correlation {
    debug_assert_eq!(x.len(), y.len());
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
        return Correlation {
            value: 0.0,
            defined: false,
        };
    }
    Correlation {
        value: num / (dx * dy).sqrt(),
        defined: true,
    }
}

/// Pearson correlation between one attribute column and the pair labels.
pub fn attribute_virality_correlation(
    matrix: &AttributeMatrix,
    attribute: &str,
) -> Result<Correlation, AttributeError> {
    let column = matrix.column(attribute)?;
    let x: Vec<f64> = column.iter().map(|&e| e as f64).collect();
    let y: Vec<f64> = matrix.labels.iter().map(|&l| l as f64).collect();
    Ok(pearson(&x, &y))
}

/// Every attribute's correlation, strongest first (ties by name); undefined
/// correlations rank as 0.
pub fn all_correlations(matrix: &AttributeMatrix) -> Vec<(String, Correlation)> {
    let mut rows: Vec<(String, Correlation)> = matrix
        .attributes
        .iter()
        .map(|a| {
            let c = attribute_virality_correlation(matrix, a).expect("attribute from matrix");
            (a.clone(), c)
        })
        .collect();
    rows.sort_by(|a, b| {
        b.1.value
            .partial_cmp(&a.1.value)
            .expect("finite correlation")
            .then(a.0.cmp(&b.0))
    });
    rows
}

/// `attribute,correlation` rows, strongest first.
pub fn correlations_to_csv(matrix: &AttributeMatrix) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for (attribute, c) in all_correlations(matrix) {
        w.write_record([attribute.as_str(), &sig12(c.value)])
            .expect("csv row");
    }
    String::from_utf8(w.into_inner().expect("csv flush")).expect("csv output is utf-8")
}

/// How a combo turns per-attribute votes into one score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComboMode {
    /// Sum of signed votes.
    Sum,
    /// First nonzero signed vote in combo order decides alone.
    Force,
}

impl std::str::FromStr for ComboMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "sum" => Ok(ComboMode::Sum),
            "force" => Ok(ComboMode::Force),
            other => Err(format!("unknown combo mode {other:?} (expected sum or force)")),
        }
    }
}

/// Resolves combo attribute names to column indices once.
fn combo_columns(
    matrix: &AttributeMatrix,
    combo: &[SignedAttribute],
) -> Result<Vec<(usize, i32)>, AttributeError> {
    combo
        .iter()
        .map(|sa| {
            matrix
                .attribute_index(&sa.attribute)
                .map(|idx| (idx, sa.direction.sign()))
                .ok_or_else(|| AttributeError::UnknownAttribute(sa.attribute.clone()))
        })
        .collect()
}

fn row_score(matrix: &AttributeMatrix, row: usize, columns: &[(usize, i32)], mode: ComboMode) -> i32 {
    match mode {
        ComboMode::Sum => columns
            .iter()
            .map(|&(idx, sign)| matrix.entry(row, idx) as i32 * sign)
            .sum(),
        ComboMode::Force => columns
            .iter()
            .map(|&(idx, sign)| matrix.entry(row, idx) as i32 * sign)
            .find(|&v| v != 0)
            .unwrap_or(0),
    }
}

/// Combined signed vote of a combo on one matrix row. The empty combo scores
/// 0 everywhere.
pub fn combo_score(
    matrix: &AttributeMatrix,
    row: usize,
    combo: &[SignedAttribute],
    mode: ComboMode,
) -> Result<i32, AttributeError> {
    let columns = combo_columns(matrix, combo)?;
    Ok(row_score(matrix, row, &columns, mode))
}

/// Pearson correlation between per-pair combo scores and the pair labels.
pub fn combo_correlation(
    matrix: &AttributeMatrix,
    combo: &[SignedAttribute],
    mode: ComboMode,
) -> Result<Correlation, AttributeError> {
    let columns = combo_columns(matrix, combo)?;
    Ok(combo_correlation_resolved(matrix, &columns, mode))
}

fn combo_correlation_resolved(
    matrix: &AttributeMatrix,
    columns: &[(usize, i32)],
    mode: ComboMode,
) -> Correlation {
    let x: Vec<f64> = (0..matrix.n_pairs())
        .map(|row| row_score(matrix, row, columns, mode) as f64)
        .collect();
    let y: Vec<f64> = matrix.labels.iter().map(|&l| l as f64).collect();
    pearson(&x, &y)
}

/// Fraction of pairs where the combo score's sign matches the label. A score
/// of 0 predicts neither side and counts as incorrect.
pub fn combo_accuracy(
    matrix: &AttributeMatrix,
    combo: &[SignedAttribute],
    mode: ComboMode,
) -> Result<f64, AttributeError> {
    let columns = combo_columns(matrix, combo)?;
    let correct = (0..matrix.n_pairs())
        .filter(|&row| {
            let score = row_score(matrix, row, &columns, mode);
            score.signum() as i8 == matrix.labels[row]
        })
        .count();
    Ok(correct as f64 / matrix.n_pairs() as f64)
}

/// [`combo_accuracy`] with tied scores resolved by a seeded coin instead of
/// counting as incorrect; for sensitivity analysis only.
pub fn combo_accuracy_seeded_ties(
    matrix: &AttributeMatrix,
    combo: &[SignedAttribute],
    mode: ComboMode,
    seed: u64,
) -> Result<f64, AttributeError> {
    let columns = combo_columns(matrix, combo)?;
    let mut rng = StdRng::seed_from_u64(seed);
    let correct = (0..matrix.n_pairs())
        .filter(|&row| {
            let score = row_score(matrix, row, &columns, mode);
            let predicted: i8 = match score.signum() {
                0 => {
                    if rng.gen_bool(0.5) {
                        1
                    } else {
                        -1
                    }
                }
                s => s as i8,
            };
            predicted == matrix.labels[row]
        })
        .count();
    Ok(correct as f64 / matrix.n_pairs() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyOptions {
    /// Upper bound on combo size; the search may stop earlier.
    pub max_size: usize,
    pub mode: ComboMode,
    /// Forces the first pick instead of choosing it by correlation.
    pub seed_attribute: Option<SignedAttribute>,
    /// Attribute names never considered.
    pub exclusions: BTreeSet<String>,
    /// A later step must improve correlation by strictly more than this to
    /// be taken. 0 admits every strict improvement; negative values allow
    /// plateaus or mild regressions.
    pub epsilon: f64,
}

impl Default for GreedyOptions {
    fn default() -> Self {
        GreedyOptions {
            max_size: usize::MAX,
            mode: ComboMode::Sum,
            seed_attribute: None,
            exclusions: BTreeSet::new(),
            epsilon: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyStep {
    pub attribute: SignedAttribute,
    /// Correlation of the combo up to and including this step.
    pub correlation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyTrace {
    pub steps: Vec<GreedyStep>,
    pub mode: ComboMode,
}

impl GreedyTrace {
    pub fn combo(&self) -> Vec<SignedAttribute> {
        self.steps.iter().map(|s| s.attribute.clone()).collect()
    }

    /// `step,direction,attribute,correlation` rows, steps 1-based.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for (i, step) in self.steps.iter().enumerate() {
            w.write_record([
                (i + 1).to_string().as_str(),
                step.attribute.direction.as_str(),
                &step.attribute.attribute,
                &sig12(step.correlation),
            ])
            .expect("csv row");
        }
        String::from_utf8(w.into_inner().expect("csv flush")).expect("csv output is utf-8")
    }
}

/// Best next signed attribute for a combo, by exhaustive evaluation of every
/// unused, non-excluded attribute in both directions. Ties break toward
/// higher correlation, then UP before DOWN, then lexicographic name. Returns
/// None when nothing is available.
fn best_extension(
    matrix: &AttributeMatrix,
    combo: &[SignedAttribute],
    exclusions: &BTreeSet<String>,
    mode: ComboMode,
) -> Option<GreedyStep> {
    let used: BTreeSet<&str> = combo.iter().map(|sa| sa.attribute.as_str()).collect();
    let mut columns = combo_columns(matrix, combo).expect("combo came from this matrix");
    let mut best: Option<GreedyStep> = None;
    for attribute in &matrix.attributes {
        if used.contains(attribute.as_str()) || exclusions.contains(attribute) {
            continue;
        }
        let idx = matrix.attribute_index(attribute).expect("listed attribute");
        for direction in [Direction::Up, Direction::Down] {
            columns.push((idx, direction.sign()));
            let correlation = combo_correlation_resolved(matrix, &columns, mode).value;
            columns.pop();
            let candidate = GreedyStep {
                attribute: SignedAttribute {
                    attribute: attribute.clone(),
                    direction,
                },
                correlation,
            };
            let better = match &best {
                None => true,
                Some(b) => {
                    correlation > b.correlation
                        || (correlation == b.correlation
                            && (candidate.attribute.direction, &candidate.attribute.attribute)
                                < (b.attribute.direction, &b.attribute.attribute))
                }
            };
            if better {
                best = Some(candidate);
            }
        }
    }
    best
}

/// Greedy forward selection of a signed attribute combo.
///
/// The first pick maximizes the singleton combo correlation (equivalently,
/// the attribute with the largest absolute correlation, signed to make it
/// positive), unless `seed_attribute` dictates it. Each later step tries
/// every remaining attribute in both directions and keeps the best, stopping
/// at `max_size` or when no candidate beats the current correlation by more
/// than `epsilon`.
pub fn greedy_select(
    matrix: &AttributeMatrix,
    options: &GreedyOptions,
) -> Result<GreedyTrace, AttributeError> {
    if options.max_size == 0 {
        return Err(AttributeError::BadOptions("max_size must be >= 1".into()));
    }
    let available = matrix
        .attributes
        .iter()
        .filter(|a| !options.exclusions.contains(*a))
        .count();
    if available == 0 {
        return Err(AttributeError::NoAttributes);
    }

    let mut steps: Vec<GreedyStep> = Vec::new();
    let first = match &options.seed_attribute {
        Some(seed) => {
            if options.exclusions.contains(&seed.attribute) {
                return Err(AttributeError::SeedExcluded(seed.attribute.clone()));
            }
            if matrix.attribute_index(&seed.attribute).is_none() {
                return Err(AttributeError::UnknownAttribute(seed.attribute.clone()));
            }
            GreedyStep {
                attribute: seed.clone(),
                correlation: combo_correlation(matrix, std::slice::from_ref(seed), options.mode)?
                    .value,
            }
        }
        None => best_extension(matrix, &[], &options.exclusions, options.mode)
            .expect("available attributes exist"),
    };
    steps.push(first);

    loop {
        if steps.len() >= options.max_size {
            break;
        }
        let combo: Vec<SignedAttribute> = steps.iter().map(|s| s.attribute.clone()).collect();
        let Some(candidate) = best_extension(matrix, &combo, &options.exclusions, options.mode)
        else {
            break;
        };
        if candidate.correlation > steps.last().expect("first step exists").correlation + options.epsilon
        {
            steps.push(candidate);
        } else {
            break;
        }
    }

    Ok(GreedyTrace {
        steps,
        mode: options.mode,
    })
}
