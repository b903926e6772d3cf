//! Core data model: submission events, per-image records, and validated corpora.
//!
//! A [`Submission`] is one posting event of an image to a category at an
//! epoch-hour. A [`Corpus`] groups submissions by image, fixes the global
//! score offset that makes every adjusted score non-negative, and caches the
//! mean resubmission count used by the virality score.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type ImageId = String;
pub type Category = String;
pub type PairId = String;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("no submissions survive validation")]
    EmptyInput,
    #[error("duplicate submission event ({image_id}, {category}, {hour_bucket})")]
    DuplicateEvent {
        image_id: ImageId,
        category: Category,
        hour_bucket: u64,
    },
    #[error("submission for image {image_id:?} has an empty required field")]
    EmptyField { image_id: ImageId },
}

impl ModelError {
    /// Stable machine-readable code, used by the CLI error channel.
    pub fn code(&self) -> &'static str {
        match self {
            ModelError::EmptyInput => "EMPTY_INPUT",
            ModelError::DuplicateEvent { .. } => "DUPLICATE_EVENT",
            ModelError::EmptyField { .. } => "EMPTY_FIELD",
        }
    }
}

/// One posting of an image to a category at a given epoch-hour.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Submission {
    pub image_id: ImageId,
    pub category: Category,
    pub hour_bucket: u64,
    pub ups: u64,
    pub downs: u64,
}

impl Submission {
    /// Raw community score: upvotes minus downvotes. May be negative.
    pub fn raw_score(&self) -> i64 {
        self.ups as i64 - self.downs as i64
    }
}

/// Every submission of one image, sorted by (hour_bucket, category).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRecord {
    pub image_id: ImageId,
    pub submissions: Vec<Submission>,
}

impl ImageRecord {
    /// Number of times the image was submitted. Always >= 1.
    pub fn resubmissions(&self) -> usize {
        self.submissions.len()
    }

    /// Distinct categories this image was submitted to, sorted.
    pub fn categories(&self) -> BTreeSet<&str> {
        self.submissions
            .iter()
            .map(|s| s.category.as_str())
            .collect()
    }
}

/// A validated submission corpus.
///
/// Invariants established by [`validate_corpus`]:
/// - every image holds at least one submission and the records partition the
///   retained submissions;
/// - `score_offset` is the smallest shift making every adjusted score
///   non-negative (0 when no raw score is negative);
/// - `mean_resubmissions` is the mean submission count per image.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub images: BTreeMap<ImageId, ImageRecord>,
    pub categories: BTreeSet<Category>,
    pub score_offset: i64,
    pub mean_resubmissions: f64,
}

impl Corpus {
    /// Offset-adjusted score of a submission; non-negative within this corpus.
    pub fn offset_score(&self, submission: &Submission) -> f64 {
        (submission.raw_score() + self.score_offset) as f64
    }

    pub fn n_images(&self) -> usize {
        self.images.len()
    }

    pub fn n_submissions(&self) -> usize {
        self.images.values().map(ImageRecord::resubmissions).sum()
    }

    pub fn image(&self, image_id: &str) -> Option<&ImageRecord> {
        self.images.get(image_id)
    }
}

/// Signed pairwise virality judgment: +1 when `image_a` is the more viral
/// member, -1 when `image_b` is.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairLabel {
    pub pair_id: PairId,
    pub image_a: ImageId,
    pub image_b: ImageId,
    pub label: i8,
}

/// One worker's relative-attribute vote on a pair: +1 means the more viral
/// member shows more of the attribute, -1 less, 0 equal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeAnnotation {
    pub pair_id: PairId,
    pub attribute: String,
    pub worker_id: String,
    pub label: i8,
}

/// Dense per-image feature vector. All vectors in one set share a length.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub image_id: ImageId,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    pub fn sign(self) -> i32 {
        match self {
            Direction::Up => 1,
            Direction::Down => -1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
        }
    }
}

/// An attribute with a polarity: `Down` flips every vote on the attribute.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SignedAttribute {
    pub attribute: String,
    pub direction: Direction,
}

impl SignedAttribute {
    pub fn up(attribute: impl Into<String>) -> Self {
        SignedAttribute {
            attribute: attribute.into(),
            direction: Direction::Up,
        }
    }

    pub fn down(attribute: impl Into<String>) -> Self {
        SignedAttribute {
            attribute: attribute.into(),
            direction: Direction::Down,
        }
    }
}

impl std::fmt::Display for SignedAttribute {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.direction.as_str(), self.attribute)
    }
}

/// Groups raw submissions into a [`Corpus`].
///
/// Categories with fewer than `min_category_submissions` total submissions are
/// dropped along with their submissions; images whose submissions all fall in
/// dropped categories disappear. Duplicate `(image_id, category, hour_bucket)`
/// events anywhere in the input are a data error.
pub fn validate_corpus(
    raw_submissions: &[Submission],
    min_category_submissions: usize,
) -> Result<Corpus, ModelError> {
    let mut seen: HashSet<(&str, &str, u64)> = HashSet::with_capacity(raw_submissions.len());
    for s in raw_submissions {
        if s.image_id.is_empty() || s.category.is_empty() {
            return Err(ModelError::EmptyField {
                image_id: s.image_id.clone(),
            });
        }
        if !seen.insert((s.image_id.as_str(), s.category.as_str(), s.hour_bucket)) {
            return Err(ModelError::DuplicateEvent {
                image_id: s.image_id.clone(),
                category: s.category.clone(),
                hour_bucket: s.hour_bucket,
            });
        }
    }

    let mut category_totals: BTreeMap<&str, usize> = BTreeMap::new();
    for s in raw_submissions {
        *category_totals.entry(s.category.as_str()).or_insert(0) += 1;
    }
    let kept: BTreeSet<&str> = category_totals
        .iter()
        .filter(|(_, &n)| n >= min_category_submissions)
        .map(|(&c, _)| c)
        .collect();

    let mut images: BTreeMap<ImageId, ImageRecord> = BTreeMap::new();
    let mut retained = 0usize;
    let mut min_raw = i64::MAX;
    for s in raw_submissions {
        if !kept.contains(s.category.as_str()) {
            continue;
        }
        retained += 1;
        min_raw = min_raw.min(s.raw_score());
        images
            .entry(s.image_id.clone())
            .or_insert_with(|| ImageRecord {
                image_id: s.image_id.clone(),
                submissions: Vec::new(),
            })
            .submissions
            .push(s.clone());
    }
    if retained == 0 {
        return Err(ModelError::EmptyInput);
    }
    for record in images.values_mut() {
        record
            .submissions
            .sort_by(|a, b| (a.hour_bucket, &a.category).cmp(&(b.hour_bucket, &b.category)));
    }

    let categories: BTreeSet<Category> = kept.iter().map(|c| c.to_string()).collect();
    let score_offset = (-min_raw).max(0);
    let mean_resubmissions = retained as f64 / images.len() as f64;

    Ok(Corpus {
        images,
        categories,
        score_offset,
        mean_resubmissions,
    })
}
