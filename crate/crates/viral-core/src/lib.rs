/*!
Analysis toolkit for image virality on resubmission-driven social platforms.

Submission metadata (which image, which category, which hour, how many up-
and downvotes) is enough to ask: which images did not just score well once,
but kept scoring well as they were resubmitted? The crate covers the full
desk workflow:

- [`model`] / [`ingest`]: typed records and tolerant parsers for submission
  dumps, pair labels, attribute annotations, and feature tables.
- [`scoring`]: hour-of-week baselines, normalized submission scores, and the
  virality score that separates spread from one-off popularity.
- [`datasets`]: viral/non-viral dichotomies, labeled image pairs, category
  dominance selections, lookalike proxies, and a seeded synthetic corpus
  generator for testing.
- [`attributes`]: majority-vote aggregation of relative-attribute judgments,
  attribute-virality correlations, and greedy search for the attribute
  combination most aligned with virality.
- [`learn`]: small deterministic linear classifiers (hinge loss, L2) for
  pairwise and attribute prediction tasks, with seeded cross-validation.
- [`eval`]: pairwise accuracy, hit rates, confusion matrices, and comparison
  reports.

Everything randomized takes an explicit seed and is deterministic given equal
inputs and seed.
*/

pub mod attributes;
pub mod datasets;
pub mod defaults;
pub mod eval;
pub mod fmt;
pub mod ingest;
pub mod learn;
pub mod model;
pub mod scoring;
