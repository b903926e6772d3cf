//! Default analysis constants. Every knob here is overridable at the call
//! site or on the command line; these are the values the tooling assumes when
//! nothing else is said.

/// Images per side of the viral/non-viral dichotomy.
pub const DICHOTOMY_K: usize = 250;

/// Minimum total submissions for a category to be retained at validation.
pub const MIN_CATEGORY_SUBMISSIONS: usize = 100;

/// Images selected per category when building a category-dominance dataset.
pub const PER_CATEGORY_IMAGES: usize = 85;

/// Folds for cross-validated accuracy estimates.
pub const CV_FOLDS: usize = 10;

/// Pairs generated (before filtering) by the random-mix pair builder.
pub const RANDOM_MIX_PAIRS: usize = 500;

/// Neighbor ranks (1-based, nearest first) used as lookalike proxies.
pub const PROXY_NEIGHBOR_RANKS: [usize; 2] = [4, 6];

/// The compact attribute set used for attribute-based virality prediction.
pub const CORE_ATTRIBUTES: [&str; 5] = [
    "animal",
    "synthetically generated",
    "beautiful",
    "explicit",
    "sexual",
];

/// Attributes excluded from greedy combination search by default: direct
/// restatements of the prediction target rather than image content.
pub const EXCLUDED_ATTRIBUTES: [&str; 2] = ["likely to go viral", "memorable"];
