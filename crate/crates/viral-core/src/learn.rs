//! Linear classifiers over image features, trained with the Pegasos
//! stochastic subgradient method (hinge loss, L2 regularization), plus the
//! cross-validation plumbing the pipeline uses.
//!
//! Models standardize inputs internally. Pairwise tasks (features built as
//! differences of two images) train with `fit_bias: false`; those models
//! center at zero and scale by per-dimension RMS so that negating the input
//! negates the margin bit for bit, keeping predictions consistent when a
//! pair is presented in either order.

use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use thiserror::Error;

use crate::attributes::AttributeMatrix;
use crate::fmt::sig12;
use crate::model::{ImageId, PairLabel};

#[derive(Debug, Error, PartialEq)]
pub enum LearnError {
    #[error("training data contains fewer than two classes")]
    OneClass,
    #[error("feature dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("no features for image {0:?}")]
    MissingFeatures(ImageId),
    #[error("bad training configuration: {0}")]
    BadConfig(String),
    #[error("cannot split {n} samples into {k} folds")]
    BadFoldCount { n: usize, k: usize },
    #[error("bad model file: {0}")]
    BadModelFile(String),
}

impl LearnError {
    pub fn code(&self) -> &'static str {
        match self {
            LearnError::OneClass => "ONE_CLASS",
            LearnError::DimensionMismatch { .. } => "DIMENSION_MISMATCH",
            LearnError::MissingFeatures(_) => "MISSING_FEATURES",
            LearnError::BadConfig(_) => "BAD_CONFIG",
            LearnError::BadFoldCount { .. } => "BAD_FOLD_COUNT",
            LearnError::BadModelFile(_) => "BAD_MODEL_FILE",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    /// L2 regularization strength; must be finite and positive.
    pub regularization: f64,
    pub epochs: u32,
    /// Seeds the per-epoch sample shuffle.
    pub seed: u64,
    /// When true, a free intercept is learned; when false, the intercept is
    /// fixed at zero and standardization keeps the model odd in its input.
    pub fit_bias: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            regularization: 1e-3,
            epochs: 50,
            seed: 0,
            fit_bias: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    /// Weights in standardized space, one per input dimension.
    pub weights: Vec<f64>,
    /// Zero unless trained with `fit_bias`.
    pub bias: f64,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl LinearModel {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn margin(&self, x: &[f64]) -> Result<f64, LearnError> {
        if x.len() != self.weights.len() {
            return Err(LearnError::DimensionMismatch {
                expected: self.weights.len(),
                found: x.len(),
            });
        }
        let mut acc = 0.0;
        for d in 0..x.len() {
            acc += self.weights[d] * ((x[d] - self.means[d]) / self.scales[d]);
        }
        Ok(acc + self.bias)
    }
}

/// Hard prediction plus the margin it came from; a zero margin predicts +1.
pub fn predict(model: &LinearModel, x: &[f64]) -> Result<(i8, f64), LearnError> {
    let m = model.margin(x)?;
    Ok((if m >= 0.0 { 1 } else { -1 }, m))
}

/// Feature vector for an ordered pair: element-wise a minus b.
pub fn pair_features(
    features: &BTreeMap<ImageId, Vec<f64>>,
    pair: &PairLabel,
) -> Result<Vec<f64>, LearnError> {
    let a = features
        .get(&pair.image_a)
        .ok_or_else(|| LearnError::MissingFeatures(pair.image_a.clone()))?;
    let b = features
        .get(&pair.image_b)
        .ok_or_else(|| LearnError::MissingFeatures(pair.image_b.clone()))?;
    if a.len() != b.len() {
        return Err(LearnError::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| x - y).collect())
}

fn validate_training_input(
    xs: &[Vec<f64>],
    ys: &[i8],
    config: &TrainConfig,
) -> Result<usize, LearnError> {
    if !(config.regularization.is_finite() && config.regularization > 0.0) {
        return Err(LearnError::BadConfig(
            "regularization must be finite and positive".into(),
        ));
    }
    if config.epochs == 0 {
        return Err(LearnError::BadConfig("epochs must be at least 1".into()));
    }
    assert_eq!(xs.len(), ys.len(), "one label per sample");
    let has_pos = ys.contains(&1);
    let has_neg = ys.contains(&-1);
    if !(has_pos && has_neg) {
        return Err(LearnError::OneClass);
    }
    if ys.iter().any(|y| *y != 1 && *y != -1) {
        return Err(LearnError::BadConfig("labels must be -1 or +1".into()));
    }
    let dim = xs[0].len();
    if dim == 0 {
        return Err(LearnError::BadConfig("feature vectors are empty".into()));
    }
    for row in xs {
        if row.len() != dim {
            return Err(LearnError::DimensionMismatch {
                expected: dim,
                found: row.len(),
            });
        }
    }
    Ok(dim)
}

/// Per-dimension (means, scales). Zero-centered mode keeps means at exactly
/// zero and scales by RMS, preserving oddness; otherwise mean/population-std.
/// A dimension with no spread gets scale 1.
fn standardization(xs: &[Vec<f64>], dim: usize, zero_centered: bool) -> (Vec<f64>, Vec<f64>) {
    let n = xs.len() as f64;
    let mut means = vec![0.0; dim];
    if !zero_centered {
        for row in xs {
            for (m, x) in means.iter_mut().zip(row) {
                *m += x;
            }
        }
        for m in means.iter_mut() {
            *m /= n;
        }
    }
    let mut scales = vec![0.0; dim];
    for row in xs {
        for d in 0..dim {
            let c = row[d] - means[d];
            scales[d] += c * c;
        }
    }
    for s in scales.iter_mut() {
        *s = (*s / n).sqrt();
        if *s == 0.0 {
            *s = 1.0;
        }
    }
    (means, scales)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Pegasos on pre-standardized rows. Returns the weight vector and the
/// regularized objective at the end of each epoch.
fn pegasos(
    xs: &[Vec<f64>],
    ys: &[f64],
    lambda: f64,
    epochs: u32,
    seed: u64,
) -> (Vec<f64>, Vec<f64>) {
    let dim = xs[0].len();
    let n = xs.len();
    let mut w = vec![0.0; dim];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut trace = Vec::with_capacity(epochs as usize);
    let mut t: u64 = 1;
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let eta = 1.0 / (lambda * t as f64);
            let violated = ys[i] * dot(&w, &xs[i]) < 1.0;
            let decay = 1.0 - eta * lambda;
            for v in w.iter_mut() {
                *v *= decay;
            }
            if violated {
                for (v, x) in w.iter_mut().zip(&xs[i]) {
                    *v += eta * ys[i] * x;
                }
            }
            t += 1;
        }
        let hinge: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| (1.0 - y * dot(&w, x)).max(0.0))
            .sum::<f64>()
            / n as f64;
        trace.push(lambda / 2.0 * dot(&w, &w) + hinge);
    }
    (w, trace)
}

pub fn train_linear(
    xs: &[Vec<f64>],
    ys: &[i8],
    config: &TrainConfig,
) -> Result<LinearModel, LearnError> {
    train_linear_traced(xs, ys, config).map(|(model, _)| model)
}

/// Like [`train_linear`] but also returns the training objective at the end
/// of each epoch. Stochastic steps make the trace noisy, not monotone.
pub fn train_linear_traced(
    xs: &[Vec<f64>],
    ys: &[i8],
    config: &TrainConfig,
) -> Result<(LinearModel, Vec<f64>), LearnError> {
    let dim = validate_training_input(xs, ys, config)?;
    let (means, scales) = standardization(xs, dim, !config.fit_bias);
    let rows: Vec<Vec<f64>> = xs
        .iter()
        .map(|row| {
            let mut r: Vec<f64> = row
                .iter()
                .enumerate()
                .map(|(d, x)| (x - means[d]) / scales[d])
                .collect();
            if config.fit_bias {
                r.push(1.0);
            }
            r
        })
        .collect();
    let ysf: Vec<f64> = ys.iter().map(|&y| y as f64).collect();
    let (mut w, trace) = pegasos(
        &rows,
        &ysf,
        config.regularization,
        config.epochs,
        config.seed,
    );
    let bias = if config.fit_bias { w.pop().expect("bias column") } else { 0.0 };
    Ok((
        LinearModel {
            weights: w,
            bias,
            means,
            scales,
        },
        trace,
    ))
}

/// Fold assignment for k-fold cross-validation over n samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CvPlan {
    pub k: usize,
    /// `fold_of[i]` is the fold that holds sample i out.
    pub fold_of: Vec<usize>,
}

impl CvPlan {
    pub fn n(&self) -> usize {
        self.fold_of.len()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_of {
            sizes[f] += 1;
        }
        sizes
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.fold_of[i] != fold).collect()
    }
}

/// Shuffles 0..n once with the seed, then deals the shuffled positions round
/// robin, so fold sizes differ by at most one.
pub fn make_cv_plan(n: usize, k: usize, seed: u64) -> Result<CvPlan, LearnError> {
    if k == 0 || k > n {
        return Err(LearnError::BadFoldCount { n, k });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = StdRng::seed_from_u64(seed);
    perm.shuffle(&mut rng);
    let mut fold_of = vec![0; n];
    for (j, &i) in perm.iter().enumerate() {
        fold_of[i] = j % k;
    }
    Ok(CvPlan { k, fold_of })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CvSpec {
    pub folds: usize,
    pub seed: u64,
}

/// A fold whose training half lost a class to the shuffle is retried with
/// the next seed at most this many times before giving up.
pub const MAX_SEED_BUMPS: u32 = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct FoldStat {
    pub fold: usize,
    pub n: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    /// Out-of-fold prediction per sample.
    pub predictions: Vec<i8>,
    pub accuracy: f64,
    pub fold_accuracy: Vec<FoldStat>,
    /// Plan reshuffles that were needed before every fold could train.
    pub seed_bumps: u32,
}

/// Out-of-fold evaluation of [`train_linear`] under a cross-validation plan.
/// When a fold's training half is one-class, the whole plan is rebuilt with
/// the next seed (counted in the report) rather than training a degenerate
/// fold.
pub fn cross_validate_linear(
    xs: &[Vec<f64>],
    ys: &[i8],
    cv: &CvSpec,
    config: &TrainConfig,
) -> Result<CvReport, LearnError> {
    assert_eq!(xs.len(), ys.len(), "one label per sample");
    let n = xs.len();
    let mut seed = cv.seed;
    let mut bumps = 0u32;
    'attempt: loop {
        let plan = make_cv_plan(n, cv.folds, seed)?;
        let mut predictions = vec![0i8; n];
        let mut fold_accuracy = Vec::with_capacity(plan.k);
        for fold in 0..plan.k {
            let train_idx = plan.train_indices(fold);
            let txs: Vec<Vec<f64>> = train_idx.iter().map(|&i| xs[i].clone()).collect();
            let tys: Vec<i8> = train_idx.iter().map(|&i| ys[i]).collect();
            let fold_config = TrainConfig {
                seed: config.seed.wrapping_add(fold as u64),
                ..*config
            };
            let model = match train_linear(&txs, &tys, &fold_config) {
                Ok(model) => model,
                Err(LearnError::OneClass) => {
                    if bumps >= MAX_SEED_BUMPS {
                        return Err(LearnError::OneClass);
                    }
                    bumps += 1;
                    seed = seed.wrapping_add(1);
                    continue 'attempt;
                }
                Err(e) => return Err(e),
            };
            let test_idx = plan.test_indices(fold);
            let mut correct = 0usize;
            for &i in &test_idx {
                let (label, _) = predict(&model, &xs[i])?;
                predictions[i] = label;
                if label == ys[i] {
                    correct += 1;
                }
            }
            fold_accuracy.push(FoldStat {
                fold,
                n: test_idx.len(),
                accuracy: correct as f64 / test_idx.len() as f64,
            });
        }
        let accuracy =
            predictions.iter().zip(ys).filter(|(p, y)| p == y).count() as f64 / n as f64;
        return Ok(CvReport {
            predictions,
            accuracy,
            fold_accuracy,
            seed_bumps: bumps,
        });
    }
}

/// Pairwise predictor from per-pair attribute values; always bias-free so a
/// flipped pair gets the opposite answer.
pub fn train_attribute_virality(
    attr_preds: &[Vec<f64>],
    labels: &[i8],
    cv: &CvSpec,
    config: &TrainConfig,
) -> Result<CvReport, LearnError> {
    let cfg = TrainConfig {
        fit_bias: false,
        ..*config
    };
    cross_validate_linear(attr_preds, labels, cv, &cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelativeAttributeReport {
    pub attribute: String,
    /// Out-of-fold three-way prediction per matrix row: -1, 0, or +1.
    pub predictions: Vec<i8>,
    /// Exact three-way agreement with the voted entries.
    pub accuracy3: f64,
    /// Agreement on rows whose voted entry is nonzero; predicting 0 there
    /// counts as wrong.
    pub accuracy2: f64,
    /// Rows with a nonzero voted entry.
    pub n2: usize,
    /// Per-fold three-way accuracy.
    pub fold_accuracy: Vec<FoldStat>,
    pub seed_bumps: u32,
}

/// Cross-validated predictor of one attribute's per-pair vote from image
/// features.
///
/// Two stages share the pair's feature difference: a gate (free bias)
/// decides zero versus nonzero, then a bias-free sign model, trained only on
/// the fold's nonzero rows, picks the direction for rows the gate lets
/// through. Either stage losing a class to the shuffle rebuilds the plan
/// under the next seed, as in [`cross_validate_linear`].
pub fn train_relative_attribute(
    features: &BTreeMap<ImageId, Vec<f64>>,
    pairs: &[PairLabel],
    matrix: &AttributeMatrix,
    attribute: &str,
    cv: &CvSpec,
    config: &TrainConfig,
) -> Result<RelativeAttributeReport, LearnError> {
    if pairs.len() != matrix.n_pairs()
        || pairs
            .iter()
            .zip(matrix.pair_ids())
            .any(|(p, id)| &p.pair_id != id)
    {
        return Err(LearnError::BadConfig(
            "pairs must align with the attribute matrix rows".into(),
        ));
    }
    let truth: Vec<i8> = matrix
        .column(attribute)
        .map_err(|_| LearnError::BadConfig(format!("unknown attribute {attribute:?}")))?;
    let rows: Vec<Vec<f64>> = pairs
        .iter()
        .map(|p| pair_features(features, p))
        .collect::<Result<_, _>>()?;
    let n = rows.len();

    let mut seed = cv.seed;
    let mut bumps = 0u32;
    'attempt: loop {
        let plan = make_cv_plan(n, cv.folds, seed)?;
        let mut predictions = vec![0i8; n];
        let mut fold_accuracy = Vec::with_capacity(plan.k);
        for fold in 0..plan.k {
            let train_idx = plan.train_indices(fold);
            let gate_xs: Vec<Vec<f64>> = train_idx.iter().map(|&i| rows[i].clone()).collect();
            let gate_ys: Vec<i8> = train_idx
                .iter()
                .map(|&i| if truth[i] != 0 { 1 } else { -1 })
                .collect();
            let sign_idx: Vec<usize> = train_idx
                .iter()
                .copied()
                .filter(|&i| truth[i] != 0)
                .collect();
            let sign_xs: Vec<Vec<f64>> = sign_idx.iter().map(|&i| rows[i].clone()).collect();
            let sign_ys: Vec<i8> = sign_idx.iter().map(|&i| truth[i]).collect();

            let fold_seed = config.seed.wrapping_add(fold as u64);
            let gate_config = TrainConfig {
                fit_bias: true,
                seed: fold_seed,
                ..*config
            };
            let sign_config = TrainConfig {
                fit_bias: false,
                seed: fold_seed,
                ..*config
            };
            let trained = train_linear(&gate_xs, &gate_ys, &gate_config)
                .and_then(|gate| Ok((gate, train_linear(&sign_xs, &sign_ys, &sign_config)?)));
            let (gate, sign) = match trained {
                Ok(models) => models,
                Err(LearnError::OneClass) => {
                    if bumps >= MAX_SEED_BUMPS {
                        return Err(LearnError::OneClass);
                    }
                    bumps += 1;
                    seed = seed.wrapping_add(1);
                    continue 'attempt;
                }
                Err(e) => return Err(e),
            };

            let test_idx = plan.test_indices(fold);
            let mut correct = 0usize;
            for &i in &test_idx {
                let (gate_label, _) = predict(&gate, &rows[i])?;
                predictions[i] = if gate_label < 0 {
                    0
                } else {
                    predict(&sign, &rows[i])?.0
                };
                if predictions[i] == truth[i] {
                    correct += 1;
                }
            }
            fold_accuracy.push(FoldStat {
                fold,
                n: test_idx.len(),
                accuracy: correct as f64 / test_idx.len() as f64,
            });
        }

        let accuracy3 =
            predictions.iter().zip(&truth).filter(|(p, t)| p == t).count() as f64 / n as f64;
        let n2 = truth.iter().filter(|&&t| t != 0).count();
        let correct2 = predictions
            .iter()
            .zip(&truth)
            .filter(|(p, t)| **t != 0 && p == t)
            .count();
        let accuracy2 = if n2 == 0 { 0.0 } else { correct2 as f64 / n2 as f64 };
        return Ok(RelativeAttributeReport {
            attribute: attribute.to_string(),
            predictions,
            accuracy3,
            accuracy2,
            n2,
            fold_accuracy,
            seed_bumps: bumps,
        });
    }
}

/// Serializes a model as four lines: a `#dim=<N> bias=<b>` header, then
/// weights, means, and scales as space-separated floats.
pub fn write_model(model: &LinearModel) -> String {
    let mut out = format!("#dim={} bias={}\n", model.weights.len(), sig12(model.bias));
    for values in [&model.weights, &model.means, &model.scales] {
        let line: Vec<String> = values.iter().map(|v| sig12(*v)).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn read_model(text: &str) -> Result<LinearModel, LearnError> {
    let bad = |msg: &str| LearnError::BadModelFile(msg.to_string());
    let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    if lines.len() != 4 {
        return Err(LearnError::BadModelFile(format!(
            "expected 4 lines, found {}",
            lines.len()
        )));
    }
    let header = lines[0]
        .strip_prefix("#dim=")
        .ok_or_else(|| bad("first line must start with #dim="))?;
    let (dim_text, bias_text) = header
        .split_once(" bias=")
        .ok_or_else(|| bad("header must contain bias="))?;
    let dim: usize = dim_text.parse().map_err(|_| bad("bad dimension"))?;
    if dim == 0 {
        return Err(bad("dimension must be at least 1"));
    }
    let bias: f64 = bias_text.parse().map_err(|_| bad("bad bias"))?;
    if !bias.is_finite() {
        return Err(bad("bias must be finite"));
    }
    let mut vectors = Vec::with_capacity(3);
    for line in &lines[1..] {
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|tok| tok.parse::<f64>().map_err(|_| bad("bad float")))
            .collect::<Result<_, _>>()?;
        if values.len() != dim {
            return Err(LearnError::BadModelFile(format!(
                "expected {dim} values per line, found {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(bad("values must be finite"));
        }
        vectors.push(values);
    }
    let scales = vectors.pop().expect("three vectors");
    if scales.iter().any(|s| *s == 0.0) {
        return Err(bad("scales must be nonzero"));
    }
    let means = vectors.pop().expect("two vectors");
    let weights = vectors.pop().expect("one vector");
    Ok(LinearModel {
        weights,
        bias,
        means,
        scales,
    })
}

/// `task,fold,n,accuracy` rows, one per fold plus an `all` summary row.
pub fn accuracy_csv(
    task: &str,
    folds: &[FoldStat],
    overall_n: usize,
    overall_accuracy: f64,
) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for f in folds {
        w.write_record([task, &f.fold.to_string(), &f.n.to_string(), &sig12(f.accuracy)])
            .expect("csv row");
    }
    w.write_record([
        task,
        "all",
        &overall_n.to_string(),
        &sig12(overall_accuracy),
    ])
    .expect("csv row");
    String::from_utf8(w.into_inner().expect("csv flush")).expect("csv output is utf-8")
}
