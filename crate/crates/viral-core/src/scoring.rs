//! Virality and popularity scores.
//!
//! The score of a submission is normalized against the mean offset-adjusted
//! score of its (category, hour) bucket, so "twice the typical score for
//! r/funny at 9am" means the same thing in a slow hour and a busy one. An
//! image's popularity is its best normalized submission; its virality weights
//! that best score by `ln(m_h / m_bar)`, the log of its resubmission count
//! relative to the corpus mean, so spread across repeated submissions is what
//! separates viral from merely popular.
//!
//! [`ScoreContext`] precomputes the per-bucket baselines and the corpus-wide
//! population of per-category log terms once; all score queries are lookups
//! after that.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::fmt::sig12;
use crate::model::{Category, Corpus, ImageId, Submission};

#[derive(Debug, Error, PartialEq)]
pub enum ScoringError {
    #[error("no submissions in bucket ({category}, {hour_bucket})")]
    EmptyBucket { category: Category, hour_bucket: u64 },
    #[error("image {0:?} is not in the corpus")]
    UnknownImage(ImageId),
    #[error("percentile rank queried for a value that is not a member of the population")]
    NotAMember,
    #[error("image {0:?} was submitted to a single category; dominance needs at least two")]
    SingleCategory(ImageId),
    #[error("image {0:?} has a zero second-best category score; dominance ratio undefined")]
    ZeroSecondScore(ImageId),
    #[error("malformed score table row at line {line}")]
    BadScoreRow { line: usize },
    #[error("score table lists image {0:?} twice")]
    DuplicateImage(ImageId),
}

impl ScoringError {
    pub fn code(&self) -> &'static str {
        match self {
            ScoringError::EmptyBucket { .. } => "EMPTY_BUCKET",
            ScoringError::UnknownImage(_) => "UNKNOWN_IMAGE",
            ScoringError::NotAMember => "NOT_A_MEMBER",
            ScoringError::SingleCategory(_) => "SINGLE_CATEGORY",
            ScoringError::ZeroSecondScore(_) => "ZERO_SECOND_SCORE",
            ScoringError::BadScoreRow { .. } => "BAD_SCORE_ROW",
            ScoringError::DuplicateImage(_) => "DUPLICATE_IMAGE",
        }
    }
}

/// Fraction of `values` at or below `x`, scaled to 0..=100. `x` must itself
/// be a member of `values`, which keeps the result strictly positive.
pub fn percentile_rank(values: &[f64], x: f64) -> Result<f64, ScoringError> {
    if !values.iter().any(|&v| v == x) {
        return Err(ScoringError::NotAMember);
    }
    let at_or_below = values.iter().filter(|&&v| v <= x).count();
    Ok(100.0 * at_or_below as f64 / values.len() as f64)
}

/// Virality from its parts: best normalized score times the log resubmission
/// ratio. The log factor is negative for images resubmitted less than
/// average, zero at exactly the average.
pub fn virality_from_parts(max_norm: f64, resubmissions: usize, mean_resubmissions: f64) -> f64 {
    max_norm * (resubmissions as f64 / mean_resubmissions).ln()
}

/// One category's weighted score for an image, plus the image-level ratio of
/// its best category score to its second best.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryScore {
    pub image_id: ImageId,
    pub category: Category,
    pub score: f64,
    pub dominance_ratio: f64,
}

struct Baseline {
    sum: f64,
    count: usize,
}

/// Read-only scoring cache over a validated corpus.
pub struct ScoreContext<'a> {
    corpus: &'a Corpus,
    baselines: BTreeMap<(Category, u64), Baseline>,
    /// Sorted population of ln(m_h^c / mean-per-category(h)) over every
    /// (image, category) incidence in the corpus.
    log_term_population: Vec<f64>,
}

impl<'a> ScoreContext<'a> {
    pub fn new(corpus: &'a Corpus) -> ScoreContext<'a> {
        let mut baselines: BTreeMap<(Category, u64), Baseline> = BTreeMap::new();
        for record in corpus.images.values() {
            for s in &record.submissions {
                let bucket = baselines
                    .entry((s.category.clone(), s.hour_bucket))
                    .or_insert(Baseline { sum: 0.0, count: 0 });
                bucket.sum += corpus.offset_score(s);
                bucket.count += 1;
            }
        }

        let mut log_term_population = Vec::new();
        for record in corpus.images.values() {
            for (_, m_hc) in per_category_counts(record.submissions.iter()) {
                log_term_population.push(log_resubmission_term(record, m_hc));
            }
        }
        log_term_population.sort_by(|a, b| a.partial_cmp(b).expect("log terms are finite"));

        ScoreContext {
            corpus,
            baselines,
            log_term_population,
        }
    }

    pub fn corpus(&self) -> &Corpus {
        self.corpus
    }

    /// Mean offset-adjusted score of every submission to `category` during
    /// `hour_bucket`.
    pub fn hour_baseline(&self, category: &str, hour_bucket: u64) -> Result<f64, ScoringError> {
        match self.baselines.get(&(category.to_string(), hour_bucket)) {
            Some(b) => Ok(b.sum / b.count as f64),
            None => Err(ScoringError::EmptyBucket {
                category: category.to_string(),
                hour_bucket,
            }),
        }
    }

    /// Submission score relative to its bucket baseline. A dead bucket
    /// (baseline 0, which forces the numerator to 0 too) normalizes to 0.
    pub fn normalized_score(&self, submission: &Submission) -> Result<f64, ScoringError> {
        let baseline = self.hour_baseline(&submission.category, submission.hour_bucket)?;
        if baseline == 0.0 {
            return Ok(0.0);
        }
        Ok(self.corpus.offset_score(submission) / baseline)
    }

    /// Best normalized score across all of an image's submissions.
    pub fn popularity_score(&self, image_id: &str) -> Result<f64, ScoringError> {
        let record = self
            .corpus
            .image(image_id)
            .ok_or_else(|| ScoringError::UnknownImage(image_id.to_string()))?;
        let mut best = f64::NEG_INFINITY;
        for s in &record.submissions {
            best = best.max(self.normalized_score(s)?);
        }
        Ok(best)
    }

    pub fn resubmission_score(&self, image_id: &str) -> Result<usize, ScoringError> {
        self.corpus
            .image(image_id)
            .map(|r| r.resubmissions())
            .ok_or_else(|| ScoringError::UnknownImage(image_id.to_string()))
    }

    /// Popularity weighted by the log resubmission ratio. The max over
    /// submissions is taken first; the log factor, which may be negative,
    /// multiplies the single best normalized score.
    pub fn virality_score(&self, image_id: &str) -> Result<f64, ScoringError> {
        let max_norm = self.popularity_score(image_id)?;
        let m = self.resubmission_score(image_id)?;
        Ok(virality_from_parts(
            max_norm,
            m,
            self.corpus.mean_resubmissions,
        ))
    }

    /// Per-category scores for a multi-category image, best first, each entry
    /// carrying the image's dominance ratio (best score over second best).
    ///
    /// The log resubmission term is mapped through a percentile rank over the
    /// corpus-wide population of such terms, which keeps every factor, and so
    /// the ratio, non-negative. Ties on score rank lexicographically by
    /// category name.
    pub fn category_scores(&self, image_id: &str) -> Result<Vec<CategoryScore>, ScoringError> {
        let record = self
            .corpus
            .image(image_id)
            .ok_or_else(|| ScoringError::UnknownImage(image_id.to_string()))?;
        let counts = per_category_counts(record.submissions.iter());
        if counts.len() < 2 {
            return Err(ScoringError::SingleCategory(image_id.to_string()));
        }

        let mut scored: Vec<(String, f64)> = Vec::with_capacity(counts.len());
        for (category, m_hc) in &counts {
            let mut a_hc: f64 = 0.0;
            for s in record.submissions.iter().filter(|s| &s.category == category) {
                a_hc = a_hc.max(self.normalized_score(s)?);
            }
            let pi = self.population_percentile(log_resubmission_term(record, *m_hc));
            scored.push((category.clone(), a_hc * pi));
        }
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite scores").then(a.0.cmp(&b.0)));

        let second = scored[1].1;
        if second == 0.0 {
            return Err(ScoringError::ZeroSecondScore(image_id.to_string()));
        }
        let dominance_ratio = scored[0].1 / second;
        Ok(scored
            .into_iter()
            .map(|(category, score)| CategoryScore {
                image_id: image_id.to_string(),
                category,
                score,
                dominance_ratio,
            })
            .collect())
    }

    /// Percentile of a member of the precomputed log-term population.
    /// Binary search over the sorted population; same counting rule as
    /// [`percentile_rank`].
    fn population_percentile(&self, x: f64) -> f64 {
        let at_or_below = self.log_term_population.partition_point(|&v| v <= x);
        debug_assert!(at_or_below > 0, "log term must be a population member");
        100.0 * at_or_below as f64 / self.log_term_population.len() as f64
    }

    pub fn score_table(&self) -> ScoreTable {
        let mut entries = BTreeMap::new();
        for image_id in self.corpus.images.keys() {
            let max_norm_score = self.popularity_score(image_id).expect("image in corpus");
            let resubmissions = self.resubmission_score(image_id).expect("image in corpus");
            entries.insert(
                image_id.clone(),
                ScoreEntry {
                    virality: virality_from_parts(
                        max_norm_score,
                        resubmissions,
                        self.corpus.mean_resubmissions,
                    ),
                    max_norm_score,
                    resubmissions,
                },
            );
        }
        ScoreTable { entries }
    }
}

/// Submission counts per category, sorted by category name.
fn per_category_counts<'s>(
    submissions: impl Iterator<Item = &'s Submission>,
) -> Vec<(String, usize)> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for s in submissions {
        *counts.entry(s.category.as_str()).or_insert(0) += 1;
    }
    counts.into_iter().map(|(c, n)| (c.to_string(), n)).collect()
}

/// ln of a category's submission count over the image's mean submissions per
/// category.
fn log_resubmission_term(record: &crate::model::ImageRecord, m_hc: usize) -> f64 {
    let n_categories = record.categories().len();
    let mean_per_category = record.resubmissions() as f64 / n_categories as f64;
    (m_hc as f64 / mean_per_category).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreEntry {
    pub virality: f64,
    pub max_norm_score: f64,
    pub resubmissions: usize,
}

/// Per-image score summary, serializable as
/// `image_id,virality,max_norm_score,resubmissions` rows sorted by image id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreTable {
    pub entries: BTreeMap<ImageId, ScoreEntry>,
}

impl ScoreTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, image_id: &str) -> Option<&ScoreEntry> {
        self.entries.get(image_id)
    }

    /// Image ids sorted by descending virality, ties by ascending image id.
    pub fn ids_by_virality(&self) -> Vec<&str> {
        let mut ids: Vec<(&str, f64)> = self
            .entries
            .iter()
            .map(|(id, e)| (id.as_str(), e.virality))
            .collect();
        ids.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite virality").then(a.0.cmp(b.0)));
        ids.into_iter().map(|(id, _)| id).collect()
    }

    /// Floats carry 12 significant digits.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for (id, e) in &self.entries {
            w.write_record([
                id.as_str(),
                &sig12(e.virality),
                &sig12(e.max_norm_score),
                &e.resubmissions.to_string(),
            ])
            .expect("csv row");
        }
        String::from_utf8(w.into_inner().expect("csv flush")).expect("csv output is utf-8")
    }

    /// Strict inverse of [`ScoreTable::to_csv`]: a score table is a tool
    /// artifact, so any malformed row is a hard error, not a skip.
    pub fn from_csv(text: &str) -> Result<ScoreTable, ScoringError> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let bad = || ScoringError::BadScoreRow { line: i + 1 };
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 || fields[0].is_empty() {
                return Err(bad());
            }
            let virality: f64 = fields[1].parse().map_err(|_| bad())?;
            let max_norm_score: f64 = fields[2].parse().map_err(|_| bad())?;
            let resubmissions: usize = fields[3].parse().map_err(|_| bad())?;
            if !virality.is_finite() || !max_norm_score.is_finite() || resubmissions == 0 {
                return Err(bad());
            }
            let id = fields[0].to_string();
            if entries
                .insert(
                    id.clone(),
                    ScoreEntry {
                        virality,
                        max_norm_score,
                        resubmissions,
                    },
                )
                .is_some()
            {
                return Err(ScoringError::DuplicateImage(id));
            }
        }
        Ok(ScoreTable { entries })
    }
}
