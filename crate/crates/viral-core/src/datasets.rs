//! Dataset construction: extreme-set dichotomies, labeled pair sets, category
//! dominance selections, lookalike proxies, and a synthetic corpus generator.
//!
//! Everything seeded is deterministic: equal inputs and equal seed give equal
//! output, byte for byte once serialized. Random draws happen in a fixed,
//! documented order so a builder never reorders its own randomness.

use std::collections::{BTreeMap, BTreeSet};

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use thiserror::Error;

use crate::fmt::sig12;
use crate::model::{Category, ImageId, PairId, PairLabel, Submission};
use crate::scoring::{ScoreContext, ScoreTable, ScoringError};

#[derive(Debug, Error, PartialEq)]
pub enum DatasetError {
    #[error("k={k} is too large: the dichotomy needs 2k <= {n} images")]
    KTooLarge { k: usize, n: usize },
    #[error("cannot draw pair partners: the {pool} pool is empty")]
    InsufficientPool { pool: &'static str },
    #[error("category {category:?} has {found} eligible images, {needed} requested")]
    InsufficientImages {
        category: Category,
        needed: usize,
        found: usize,
    },
    #[error("proxy selection needs at least {needed} candidates, found {found}")]
    TooFewCandidates { needed: usize, found: usize },
    #[error("image {0:?} has no feature vector")]
    MissingFeatures(ImageId),
    #[error("bad generator or builder spec: {0}")]
    BadSpec(String),
}

impl DatasetError {
    pub fn code(&self) -> &'static str {
        match self {
            DatasetError::KTooLarge { .. } => "K_TOO_LARGE",
            DatasetError::InsufficientPool { .. } => "INSUFFICIENT_POOL",
            DatasetError::InsufficientImages { .. } => "INSUFFICIENT_IMAGES",
            DatasetError::TooFewCandidates { .. } => "TOO_FEW_CANDIDATES",
            DatasetError::MissingFeatures(_) => "MISSING_FEATURES",
            DatasetError::BadSpec(_) => "BAD_SPEC",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DichotomyEntry {
    pub image_id: ImageId,
    pub virality: f64,
}

/// The k most and k least viral images of a corpus. `viral` is ordered by
/// descending virality, `nonviral` by ascending virality; the two sides are
/// disjoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Dichotomy {
    pub viral: Vec<DichotomyEntry>,
    pub nonviral: Vec<DichotomyEntry>,
}

impl Dichotomy {
    pub fn k(&self) -> usize {
        self.viral.len()
    }

    pub fn viral_ids(&self) -> BTreeSet<&str> {
        self.viral.iter().map(|e| e.image_id.as_str()).collect()
    }

    pub fn nonviral_ids(&self) -> BTreeSet<&str> {
        self.nonviral.iter().map(|e| e.image_id.as_str()).collect()
    }

    /// `side,rank,image_id,virality` rows, viral side first, rank 1-based
    /// within each side.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for (side, entries) in [("viral", &self.viral), ("nonviral", &self.nonviral)] {
            for (i, e) in entries.iter().enumerate() {
                w.write_record([side, &(i + 1).to_string(), &e.image_id, &sig12(e.virality)])
                    .expect("csv row");
            }
        }
        String::from_utf8(w.into_inner().expect("csv flush")).expect("csv output is utf-8")
    }
}

/// Splits a score table into its k most and k least viral images.
///
/// Images are placed on one total order (virality descending, then image id
/// ascending), so the two sides are disjoint even when scores tie across the
/// middle of the table.
pub fn build_dichotomy(table: &ScoreTable, k: usize) -> Result<Dichotomy, DatasetError> {
    if k == 0 {
        return Err(DatasetError::BadSpec("dichotomy needs k >= 1".into()));
    }
    let n = table.len();
    if 2 * k > n {
        return Err(DatasetError::KTooLarge { k, n });
    }
    let order = table.ids_by_virality();
    let entry = |id: &str| DichotomyEntry {
        image_id: id.to_string(),
        virality: table.get(id).expect("id from table").virality,
    };
    let viral = order[..k].iter().map(|id| entry(id)).collect();
    let nonviral = order[n - k..].iter().rev().map(|id| entry(id)).collect();
    Ok(Dichotomy { viral, nonviral })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairProvenance {
    RandomMix,
    TopBottom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairSet {
    pub pairs: Vec<PairLabel>,
    pub provenance: PairProvenance,
}

impl PairSet {
    pub fn to_csv(&self) -> String {
        crate::ingest::write_pairs_csv(&self.pairs)
    }
}

/// Options for [`build_random_mix_pairs`]. `filter_extremes` drops pairs
/// whose members both sit in the dichotomy's extreme sets; disable it to
/// keep every generated pair (useful for large training pair sets built from
/// a half-corpus dichotomy).
#[derive(Debug, Clone, Copy)]
pub struct RandomMixOptions {
    pub n_pairs: usize,
    pub seed: u64,
    pub filter_extremes: bool,
}

/// Pairs extreme images with random partners from the other half of the
/// virality range: the first half of the pairs draw (top-k image, image below
/// the median), the rest (bottom-k image, image above the median). Member
/// order within each pair is then randomized, and the label records which
/// member is truly more viral. With `filter_extremes`, pairs whose members
/// are both extreme are dropped after generation (their generated pair ids
/// keep the gaps visible).
pub fn build_random_mix_pairs(
    table: &ScoreTable,
    dichotomy: &Dichotomy,
    options: RandomMixOptions,
) -> Result<PairSet, DatasetError> {
    if options.n_pairs == 0 {
        return Err(DatasetError::BadSpec("n_pairs must be >= 1".into()));
    }
    let virality: BTreeMap<&str, f64> = table
        .entries
        .iter()
        .map(|(id, e)| (id.as_str(), e.virality))
        .collect();
    let median = median_virality(table);
    let below: Vec<&str> = virality
        .iter()
        .filter(|(_, &v)| v < median)
        .map(|(&id, _)| id)
        .collect();
    let above: Vec<&str> = virality
        .iter()
        .filter(|(_, &v)| v > median)
        .map(|(&id, _)| id)
        .collect();

    let n_top = options.n_pairs - options.n_pairs / 2;
    if n_top > 0 && below.is_empty() {
        return Err(DatasetError::InsufficientPool { pool: "below-median" });
    }
    if options.n_pairs / 2 > 0 && above.is_empty() {
        return Err(DatasetError::InsufficientPool { pool: "above-median" });
    }

    let viral: Vec<&str> = dichotomy.viral.iter().map(|e| e.image_id.as_str()).collect();
    let nonviral: Vec<&str> = dichotomy
        .nonviral
        .iter()
        .map(|e| e.image_id.as_str())
        .collect();

    let mut rng = StdRng::seed_from_u64(options.seed);
    let mut pairs = Vec::with_capacity(options.n_pairs);
    for i in 0..options.n_pairs {
        // Draw order per pair: extreme member, partner, presentation flip.
        let (extreme, partner) = if i < n_top {
            (
                viral[rng.gen_range(0..viral.len())],
                below[rng.gen_range(0..below.len())],
            )
        } else {
            (
                nonviral[rng.gen_range(0..nonviral.len())],
                above[rng.gen_range(0..above.len())],
            )
        };
        let (image_a, image_b) = if rng.gen_bool(0.5) {
            (extreme, partner)
        } else {
            (partner, extreme)
        };
        // The partner sits strictly on the other side of the median from the
        // extreme member, so the comparison is never a tie.
        let label = if virality[image_a] > virality[image_b] { 1 } else { -1 };
        pairs.push(PairLabel {
            pair_id: format!("rmx{i:05}"),
            image_a: image_a.to_string(),
            image_b: image_b.to_string(),
            label,
        });
    }

    if options.filter_extremes {
        let extreme: BTreeSet<&str> = dichotomy
            .viral_ids()
            .into_iter()
            .chain(dichotomy.nonviral_ids())
            .collect();
        pairs.retain(|p| {
            !(extreme.contains(p.image_a.as_str()) && extreme.contains(p.image_b.as_str()))
        });
    }

    Ok(PairSet {
        pairs,
        provenance: PairProvenance::RandomMix,
    })
}

fn median_virality(table: &ScoreTable) -> f64 {
    let mut vs: Vec<f64> = table.entries.values().map(|e| e.virality).collect();
    vs.sort_by(|a, b| a.partial_cmp(b).expect("finite virality"));
    let n = vs.len();
    if n % 2 == 1 {
        vs[n / 2]
    } else {
        0.5 * (vs[n / 2 - 1] + vs[n / 2])
    }
}

/// Matches each top-k image with a distinct bottom-k image under a seeded
/// shuffle, randomizing presentation order within each pair. The label names
/// the viral-side member as the more viral one.
pub fn build_topbottom_pairs(dichotomy: &Dichotomy, seed: u64) -> PairSet {
    let k = dichotomy.k();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut matching: Vec<usize> = (0..k).collect();
    matching.shuffle(&mut rng);

    let mut pairs = Vec::with_capacity(k);
    for (i, &j) in matching.iter().enumerate() {
        let viral = dichotomy.viral[i].image_id.as_str();
        let nonviral = dichotomy.nonviral[j].image_id.as_str();
        let (image_a, image_b, label) = if rng.gen_bool(0.5) {
            (viral, nonviral, 1)
        } else {
            (nonviral, viral, -1)
        };
        pairs.push(PairLabel {
            pair_id: format!("tb{i:05}"),
            image_a: image_a.to_string(),
            image_b: image_b.to_string(),
            label,
        });
    }
    PairSet {
        pairs,
        provenance: PairProvenance::TopBottom,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryPick {
    pub image_id: ImageId,
    pub dominance_ratio: f64,
}

/// For each requested category, the `per_category` images most dominated by
/// it: images whose best per-category score is in that category, ranked by
/// dominance ratio (ties at the cutoff broken by image id). Single-category
/// images and images with a zero second-best score are not eligible.
pub fn build_category_dataset(
    ctx: &ScoreContext,
    categories: &[Category],
    per_category: usize,
) -> Result<BTreeMap<Category, Vec<CategoryPick>>, DatasetError> {
    if categories.is_empty() || per_category == 0 {
        return Err(DatasetError::BadSpec(
            "category dataset needs categories and per_category >= 1".into(),
        ));
    }
    let requested: BTreeSet<&str> = categories.iter().map(|c| c.as_str()).collect();
    let mut candidates: BTreeMap<&str, Vec<CategoryPick>> = BTreeMap::new();
    for image_id in ctx.corpus().images.keys() {
        let scores = match ctx.category_scores(image_id) {
            Ok(scores) => scores,
            Err(ScoringError::SingleCategory(_)) | Err(ScoringError::ZeroSecondScore(_)) => {
                continue;
            }
            Err(other) => unreachable!("corpus image scores: {other}"),
        };
        let top = &scores[0];
        if let Some(&cat) = requested.get(top.category.as_str()) {
            candidates.entry(cat).or_default().push(CategoryPick {
                image_id: image_id.clone(),
                dominance_ratio: top.dominance_ratio,
            });
        }
    }

    let mut out = BTreeMap::new();
    for &category in &requested {
        let mut picks = candidates.remove(category).unwrap_or_default();
        if picks.len() < per_category {
            return Err(DatasetError::InsufficientImages {
                category: category.to_string(),
                needed: per_category,
                found: picks.len(),
            });
        }
        picks.sort_by(|a, b| {
            b.dominance_ratio
                .partial_cmp(&a.dominance_ratio)
                .expect("finite ratio")
                .then(a.image_id.cmp(&b.image_id))
        });
        picks.truncate(per_category);
        out.insert(category.to_string(), picks);
    }
    Ok(out)
}

/// `category,rank,image_id,dominance_ratio` rows, categories in name order,
/// rank 1-based by descending dominance.
pub fn category_dataset_to_csv(dataset: &BTreeMap<Category, Vec<CategoryPick>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for (category, picks) in dataset {
        for (i, pick) in picks.iter().enumerate() {
            w.write_record([
                category.as_str(),
                &(i + 1).to_string(),
                &pick.image_id,
                &sig12(pick.dominance_ratio),
            ])
            .expect("csv row");
        }
    }
    String::from_utf8(w.into_inner().expect("csv flush")).expect("csv output is utf-8")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProxyCondition {
    /// Proxies resemble the viral member.
    ViralNn,
    /// Proxies resemble the non-viral member.
    NonviralNn,
    /// Seeded random proxies, a similarity-free control.
    Random,
}

impl ProxyCondition {
    pub fn as_str(self) -> &'static str {
        match self {
            ProxyCondition::ViralNn => "viral-nn",
            ProxyCondition::NonviralNn => "nonviral-nn",
            ProxyCondition::Random => "random",
        }
    }
}

impl std::str::FromStr for ProxyCondition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "viral-nn" => Ok(ProxyCondition::ViralNn),
            "nonviral-nn" => Ok(ProxyCondition::NonviralNn),
            "random" => Ok(ProxyCondition::Random),
            other => Err(format!(
                "unknown proxy condition {other:?} (expected viral-nn, nonviral-nn, or random)"
            )),
        }
    }
}

/// A pair plus two stand-in images. All four ids are distinct.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProxyQuad {
    pub pair_id: PairId,
    pub condition: ProxyCondition,
    pub viral_target: ImageId,
    pub nonviral_target: ImageId,
    pub proxy_1: ImageId,
    pub proxy_2: ImageId,
}

/// Number of candidates required before proxies are selected.
pub const MIN_PROXY_CANDIDATES: usize = 7;

/// Picks two proxy images for a labeled pair: under the NN conditions the 4th
/// and 6th nearest candidates to the chosen target by Euclidean feature
/// distance (never the targets themselves; distance ties break by image id),
/// under the random condition two distinct seeded draws from the candidates.
pub fn select_proxies(
    features: &BTreeMap<ImageId, Vec<f64>>,
    pair: &PairLabel,
    condition: ProxyCondition,
    seed: u64,
) -> Result<ProxyQuad, DatasetError> {
    let (viral_target, nonviral_target) = if pair.label == 1 {
        (pair.image_a.as_str(), pair.image_b.as_str())
    } else {
        (pair.image_b.as_str(), pair.image_a.as_str())
    };
    for target in [viral_target, nonviral_target] {
        if !features.contains_key(target) {
            return Err(DatasetError::MissingFeatures(target.to_string()));
        }
    }
    let candidates: Vec<&str> = features
        .keys()
        .map(String::as_str)
        .filter(|id| *id != viral_target && *id != nonviral_target)
        .collect();
    if candidates.len() < MIN_PROXY_CANDIDATES {
        return Err(DatasetError::TooFewCandidates {
            needed: MIN_PROXY_CANDIDATES,
            found: candidates.len(),
        });
    }

    let (proxy_1, proxy_2) = match condition {
        ProxyCondition::ViralNn | ProxyCondition::NonviralNn => {
            let anchor = if condition == ProxyCondition::ViralNn {
                viral_target
            } else {
                nonviral_target
            };
            let anchor_values = &features[anchor];
            let mut by_distance: Vec<(f64, &str)> = candidates
                .iter()
                .map(|&id| (squared_distance(anchor_values, &features[id]), id))
                .collect();
            by_distance.sort_by(|a, b| {
                a.0.partial_cmp(&b.0).expect("finite distance").then(a.1.cmp(b.1))
            });
            let [first, second] = crate::defaults::PROXY_NEIGHBOR_RANKS;
            (by_distance[first - 1].1, by_distance[second - 1].1)
        }
        ProxyCondition::Random => {
            let mut rng = StdRng::seed_from_u64(seed);
            let first = candidates[rng.gen_range(0..candidates.len())];
            let mut second = candidates[rng.gen_range(0..candidates.len())];
            while second == first {
                second = candidates[rng.gen_range(0..candidates.len())];
            }
            (first, second)
        }
    };

    Ok(ProxyQuad {
        pair_id: pair.pair_id.clone(),
        condition,
        viral_target: viral_target.to_string(),
        nonviral_target: nonviral_target.to_string(),
        proxy_1: proxy_1.to_string(),
        proxy_2: proxy_2.to_string(),
    })
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len(), "feature dimensions must agree");
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `pair_id,condition,viral_target,nonviral_target,proxy_1,proxy_2` rows.
pub fn proxies_to_csv(quads: &[ProxyQuad]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for q in quads {
        w.write_record([
            q.pair_id.as_str(),
            q.condition.as_str(),
            &q.viral_target,
            &q.nonviral_target,
            &q.proxy_1,
            &q.proxy_2,
        ])
        .expect("csv row");
    }
    String::from_utf8(w.into_inner().expect("csv flush")).expect("csv output is utf-8")
}

// ---- synthetic corpus generator -------------------------------------------

/// Resubmission-count distribution. The generator couples the count to the
/// image's latent viralness through the inverse CDF, so more viral images are
/// resubmitted more while the marginal shape stays as configured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResubDist {
    /// Inclusive integer range.
    Uniform { lo: u32, hi: u32 },
    /// Geometric with success probability p, support {1, 2, ...}.
    Geometric { p: f64 },
}

/// Hard cap on per-image resubmissions; keeps hour-bucket collision
/// resolution trivially terminating (168 hour slots per category).
pub const MAX_RESUBMISSIONS: u32 = 64;

impl ResubDist {
    fn quantile(self, v: f64) -> usize {
        match self {
            ResubDist::Uniform { lo, hi } => {
                let span = (hi - lo + 1) as f64;
                (lo + ((v * span) as u32).min(hi - lo)) as usize
            }
            ResubDist::Geometric { p } => {
                let m = ((1.0 - v).ln() / (1.0 - p).ln()).ceil() as i64;
                m.clamp(1, MAX_RESUBMISSIONS as i64) as usize
            }
        }
    }
}

/// Per-submission base score distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScoreDist {
    Uniform { lo: f64, hi: f64 },
    Normal { mu: f64, sigma: f64 },
}

impl ScoreDist {
    fn sample(self, rng: &mut StdRng) -> f64 {
        match self {
            ScoreDist::Uniform { lo, hi } => rng.gen_range(lo..=hi),
            ScoreDist::Normal { mu, sigma } => {
                // Box-Muller; two uniform draws per sample, fixed order.
                let u1: f64 = 1.0 - rng.gen::<f64>();
                let u2: f64 = rng.gen();
                mu + sigma * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
            }
        }
    }
}

/// Shape of a synthetic corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub n_images: usize,
    pub n_categories: usize,
    pub resub_dist: ResubDist,
    pub score_dist: ScoreDist,
    pub seed: u64,
}

/// Hour range the generator spreads submissions over (a week).
pub const GENERATOR_HOURS: u64 = 168;

impl GeneratorSpec {
    /// Parses a plain-text `key=value` spec. Keys: `n_images`,
    /// `n_categories`, `resub_dist`, `score_dist`, `seed`. Distributions are
    /// written `uniform:lo,hi`, `geometric:p`, or `normal:mu,sigma`. Blank
    /// lines and `#` comments are ignored.
    pub fn from_config_text(text: &str) -> Result<GeneratorSpec, DatasetError> {
        let bad = |msg: String| DatasetError::BadSpec(msg);
        let mut keys: BTreeMap<&str, &str> = BTreeMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got {line:?}")))?;
            keys.insert(key.trim(), value.trim());
        }
        let take = |key: &str| {
            keys.get(key)
                .copied()
                .ok_or_else(|| bad(format!("missing key {key:?}")))
        };
        let spec = GeneratorSpec {
            n_images: take("n_images")?
                .parse()
                .map_err(|_| bad("n_images must be an integer".into()))?,
            n_categories: take("n_categories")?
                .parse()
                .map_err(|_| bad("n_categories must be an integer".into()))?,
            resub_dist: parse_resub_dist(take("resub_dist")?)?,
            score_dist: parse_score_dist(take("score_dist")?)?,
            seed: take("seed")?
                .parse()
                .map_err(|_| bad("seed must be an unsigned integer".into()))?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |msg: &str| Err(DatasetError::BadSpec(msg.into()));
        if self.n_images == 0 {
            return bad("n_images must be >= 1");
        }
        if self.n_categories == 0 {
            return bad("n_categories must be >= 1");
        }
        match self.resub_dist {
            ResubDist::Uniform { lo, hi } => {
                if lo < 1 || hi < lo || hi > MAX_RESUBMISSIONS {
                    return bad("resub_dist uniform needs 1 <= lo <= hi <= 64");
                }
            }
            ResubDist::Geometric { p } => {
                if !(p > 0.0 && p < 1.0) {
                    return bad("resub_dist geometric needs 0 < p < 1");
                }
            }
        }
        match self.score_dist {
            ScoreDist::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return bad("score_dist uniform needs finite lo <= hi");
                }
            }
            ScoreDist::Normal { mu, sigma } => {
                if !(mu.is_finite() && sigma.is_finite() && sigma >= 0.0) {
                    return bad("score_dist normal needs finite mu and sigma >= 0");
                }
            }
        }
        Ok(())
    }
}

fn parse_resub_dist(raw: &str) -> Result<ResubDist, DatasetError> {
    let bad = || DatasetError::BadSpec(format!("bad resub_dist {raw:?}"));
    let (name, args) = raw.split_once(':').ok_or_else(bad)?;
    match name.trim() {
        "uniform" => {
            let (lo, hi) = args.split_once(',').ok_or_else(bad)?;
            Ok(ResubDist::Uniform {
                lo: lo.trim().parse().map_err(|_| bad())?,
                hi: hi.trim().parse().map_err(|_| bad())?,
            })
        }
        "geometric" => Ok(ResubDist::Geometric {
            p: args.trim().parse().map_err(|_| bad())?,
        }),
        _ => Err(bad()),
    }
}

fn parse_score_dist(raw: &str) -> Result<ScoreDist, DatasetError> {
    let bad = || DatasetError::BadSpec(format!("bad score_dist {raw:?}"));
    let (name, args) = raw.split_once(':').ok_or_else(bad)?;
    let (first, second) = args.split_once(',').ok_or_else(bad)?;
    let first: f64 = first.trim().parse().map_err(|_| bad())?;
    let second: f64 = second.trim().parse().map_err(|_| bad())?;
    match name.trim() {
        "uniform" => Ok(ScoreDist::Uniform { lo: first, hi: second }),
        "normal" => Ok(ScoreDist::Normal { mu: first, sigma: second }),
        _ => Err(bad()),
    }
}

/// Latent ground truth the generator worked from; for tests only, never an
/// input to scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTruth {
    pub viralness: BTreeMap<ImageId, f64>,
    pub resubmissions: BTreeMap<ImageId, usize>,
}

impl SyntheticTruth {
    /// `image_id,viralness` rows.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for (id, v) in &self.viralness {
            w.write_record([id.as_str(), &sig12(*v)]).expect("csv row");
        }
        String::from_utf8(w.into_inner().expect("csv flush")).expect("csv output is utf-8")
    }
}

/// Generates a synthetic submission corpus with known latent structure.
///
/// Each image draws a latent viralness in [0, 1); its resubmission count is
/// the resub distribution's quantile at that latent, and each submission's
/// raw score is a score-distribution draw scaled by `0.5 + viralness`. The
/// output always passes corpus validation (no duplicate events) and carries
/// the latent table for rank-correlation checks.
///
/// Draw order, fixed for reproducibility: per image the latent, then per
/// submission category, hour, base score, and down-vote dressing.
pub fn generate_synthetic_corpus(
    spec: &GeneratorSpec,
    seed: u64,
) -> Result<(Vec<Submission>, SyntheticTruth), DatasetError> {
    spec.validate()?;
    let mut rng = StdRng::seed_from_u64(seed);
    let mut submissions = Vec::new();
    let mut viralness = BTreeMap::new();
    let mut resubmissions = BTreeMap::new();
    let mut used: BTreeSet<(usize, usize, u64)> = BTreeSet::new();

    for image in 0..spec.n_images {
        let image_id = format!("img{image:05}");
        let latent: f64 = rng.gen();
        let m = spec.resub_dist.quantile(latent);
        viralness.insert(image_id.clone(), latent);
        resubmissions.insert(image_id.clone(), m);

        for _ in 0..m {
            let category = rng.gen_range(0..spec.n_categories);
            let mut hour = rng.gen_range(0..GENERATOR_HOURS);
            // An image submits to one category at most 64 times against 168
            // hour slots, so the probe always finds a free hour.
            while !used.insert((image, category, hour)) {
                hour = (hour + 1) % GENERATOR_HOURS;
            }
            let base = spec.score_dist.sample(&mut rng);
            let raw = (base * (0.5 + latent)).round() as i64;
            let dressing: i64 = rng.gen_range(0..5);
            let (ups, downs) = if raw + dressing >= 0 {
                ((raw + dressing) as u64, dressing as u64)
            } else {
                (0, (-raw) as u64)
            };
            submissions.push(Submission {
                image_id: image_id.clone(),
                category: format!("cat{category:02}"),
                hour_bucket: hour,
                ups,
                downs,
            });
        }
    }

    Ok((
        submissions,
        SyntheticTruth {
            viralness,
            resubmissions,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_corpus;
    use crate::scoring::{ScoreEntry, ScoreTable};

    fn table_with(viralities: &[(&str, f64)]) -> ScoreTable {
        let mut table = ScoreTable::default();
        for &(id, v) in viralities {
            table.entries.insert(
                id.into(),
                ScoreEntry {
                    virality: v,
                    max_norm_score: 1.0,
                    resubmissions: 1,
                },
            );
        }
        table
    }

    #[test]
    fn dichotomy_takes_both_extremes_in_order() {
        let table = table_with(&[
            ("v5", 5.0),
            ("v4", 4.0),
            ("v3", 3.0),
            ("v2", 2.0),
            ("v1", 1.0),
            ("v0", 0.0),
        ]);
        let d = build_dichotomy(&table, 2).unwrap();
        let viral: Vec<&str> = d.viral.iter().map(|e| e.image_id.as_str()).collect();
        let nonviral: Vec<&str> = d.nonviral.iter().map(|e| e.image_id.as_str()).collect();
        assert_eq!(viral, vec!["v5", "v4"]);
        assert_eq!(nonviral, vec!["v0", "v1"]);
    }

    #[test]
    fn dichotomy_with_k_half_partitions_and_stays_disjoint_under_ties() {
        let table = table_with(&[("a", 1.0), ("b", 1.0), ("c", 1.0), ("d", 1.0)]);
        let d = build_dichotomy(&table, 2).unwrap();
        let viral = d.viral_ids();
        let nonviral = d.nonviral_ids();
        assert_eq!(viral.len(), 2);
        assert!(viral.is_disjoint(&nonviral));
        let all: BTreeSet<&str> = viral.union(&nonviral).copied().collect();
        assert_eq!(all.len(), 4);
    }

    #[test]
    fn oversized_k_is_rejected() {
        let table = table_with(&[("a", 1.0), ("b", 2.0), ("c", 3.0)]);
        assert_eq!(
            build_dichotomy(&table, 2),
            Err(DatasetError::KTooLarge { k: 2, n: 3 })
        );
    }

    #[test]
    fn dichotomy_sides_never_cross() {
        let table = table_with(&[
            ("a", 0.3),
            ("b", -1.0),
            ("c", 2.0),
            ("d", 0.3),
            ("e", 7.0),
            ("f", 0.1),
        ]);
        let d = build_dichotomy(&table, 2).unwrap();
        let min_viral = d.viral.iter().map(|e| e.virality).fold(f64::INFINITY, f64::min);
        let max_nonviral = d
            .nonviral
            .iter()
            .map(|e| e.virality)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(min_viral >= max_nonviral);
    }

    fn spread_table(n: usize) -> ScoreTable {
        // Distinct viralities 0..n.
        let mut table = ScoreTable::default();
        for i in 0..n {
            table.entries.insert(
                format!("im{i:03}"),
                ScoreEntry {
                    virality: i as f64,
                    max_norm_score: 1.0,
                    resubmissions: 1,
                },
            );
        }
        table
    }

    #[test]
    fn random_mix_pairs_have_true_labels_and_no_double_extreme_pairs() {
        let table = spread_table(40);
        let d = build_dichotomy(&table, 5).unwrap();
        let set = build_random_mix_pairs(
            &table,
            &d,
            RandomMixOptions {
                n_pairs: 30,
                seed: 7,
                filter_extremes: true,
            },
        )
        .unwrap();
        let extreme: BTreeSet<&str> = d
            .viral_ids()
            .into_iter()
            .chain(d.nonviral_ids())
            .collect();
        assert!(!set.pairs.is_empty());
        for p in &set.pairs {
            assert_ne!(p.image_a, p.image_b);
            let va = table.get(&p.image_a).unwrap().virality;
            let vb = table.get(&p.image_b).unwrap().virality;
            assert_eq!(p.label, if va > vb { 1 } else { -1 });
            assert!(
                !(extreme.contains(p.image_a.as_str()) && extreme.contains(p.image_b.as_str()))
            );
        }
    }

    #[test]
    fn random_mix_is_deterministic_per_seed() {
        let table = spread_table(30);
        let d = build_dichotomy(&table, 4).unwrap();
        let opts = RandomMixOptions {
            n_pairs: 20,
            seed: 11,
            filter_extremes: true,
        };
        let a = build_random_mix_pairs(&table, &d, opts).unwrap();
        let b = build_random_mix_pairs(&table, &d, opts).unwrap();
        assert_eq!(a, b);
        let c = build_random_mix_pairs(&table, &d, RandomMixOptions { seed: 12, ..opts }).unwrap();
        assert_ne!(a.pairs, c.pairs);
    }

    #[test]
    fn random_mix_filter_shrinks_but_never_empties_on_spread_scores() {
        let table = spread_table(60);
        let d = build_dichotomy(&table, 10).unwrap();
        let kept = build_random_mix_pairs(
            &table,
            &d,
            RandomMixOptions {
                n_pairs: 100,
                seed: 3,
                filter_extremes: true,
            },
        )
        .unwrap();
        let unfiltered = build_random_mix_pairs(
            &table,
            &d,
            RandomMixOptions {
                n_pairs: 100,
                seed: 3,
                filter_extremes: false,
            },
        )
        .unwrap();
        assert_eq!(unfiltered.pairs.len(), 100);
        assert!(kept.pairs.len() <= 100);
        // The generated ids of surviving pairs are a subsequence of the
        // unfiltered run: filtering is the only difference.
        let kept_ids: Vec<&str> = kept.pairs.iter().map(|p| p.pair_id.as_str()).collect();
        let all_ids: Vec<&str> = unfiltered.pairs.iter().map(|p| p.pair_id.as_str()).collect();
        let mut it = all_ids.iter();
        for id in kept_ids {
            assert!(it.any(|&x| x == id));
        }
    }

    #[test]
    fn degenerate_pools_are_reported() {
        // All viralities equal: nothing is strictly below or above the median.
        let table = table_with(&[("a", 1.0), ("b", 1.0), ("c", 1.0), ("d", 1.0)]);
        let d = build_dichotomy(&table, 1).unwrap();
        let err = build_random_mix_pairs(
            &table,
            &d,
            RandomMixOptions {
                n_pairs: 10,
                seed: 0,
                filter_extremes: true,
            },
        )
        .unwrap_err();
        assert_eq!(err, DatasetError::InsufficientPool { pool: "below-median" });
    }

    #[test]
    fn topbottom_is_a_perfect_matching() {
        let table = spread_table(20);
        let d = build_dichotomy(&table, 6).unwrap();
        let set = build_topbottom_pairs(&d, 42);
        assert_eq!(set.pairs.len(), 6);
        let viral_ids = d.viral_ids();
        let nonviral_ids = d.nonviral_ids();
        let mut seen_viral = BTreeSet::new();
        let mut seen_nonviral = BTreeSet::new();
        for p in &set.pairs {
            let (v, nv) = if p.label == 1 {
                (p.image_a.as_str(), p.image_b.as_str())
            } else {
                (p.image_b.as_str(), p.image_a.as_str())
            };
            assert!(viral_ids.contains(v));
            assert!(nonviral_ids.contains(nv));
            assert!(seen_viral.insert(v), "viral member reused");
            assert!(seen_nonviral.insert(nv), "nonviral member reused");
        }
        assert_eq!(build_topbottom_pairs(&d, 42), set);
    }

    #[test]
    fn category_dataset_picks_top_dominance_per_category() {
        // Two categories; x1..x3 dominated by p at ratios 2, 4, 8 and y1
        // dominated by q. Picking 2 per category fails for q.
        //
        // Construction: every (image, category) submission gets its own hour
        // bucket, shared only with zero-score fillers. With f fillers the
        // baseline is s/(f+1), so the normalized score is exactly f+1, and
        // every log term in the corpus is 0 (each image: equal submissions
        // per category), so percentiles cancel in the dominance ratio.
        fn bucket(raw: &mut Vec<Submission>, img: &str, cat: &str, hour: u64, norm_target: u64) {
            let mut push = |img: String, ups: u64| {
                raw.push(Submission {
                    image_id: img,
                    category: cat.into(),
                    hour_bucket: hour,
                    ups,
                    downs: 0,
                });
            };
            push(img.to_string(), 10);
            for f in 1..norm_target {
                push(format!("f_{cat}_{hour}_{f}"), 0);
            }
        }
        let mut raw = Vec::new();
        for (i, (img, a_p, a_q)) in [("x1", 2, 1), ("x2", 4, 1), ("x3", 8, 1), ("y1", 1, 2)]
            .into_iter()
            .enumerate()
        {
            bucket(&mut raw, img, "p", 2 * i as u64, a_p);
            bucket(&mut raw, img, "q", 2 * i as u64 + 1, a_q);
        }
        let corpus = validate_corpus(&raw, 1).unwrap();
        let ctx = ScoreContext::new(&corpus);

        let picks =
            build_category_dataset(&ctx, &["p".to_string()], 2).unwrap();
        let p: Vec<&str> = picks["p"].iter().map(|c| c.image_id.as_str()).collect();
        assert_eq!(p, vec!["x3", "x2"]); // ratios 8 and 4, descending

        let err = build_category_dataset(&ctx, &["p".to_string(), "q".to_string()], 2).unwrap_err();
        assert_eq!(
            err,
            DatasetError::InsufficientImages {
                category: "q".into(),
                needed: 2,
                found: 1,
            }
        );
    }

    fn line_features(n: usize) -> BTreeMap<ImageId, Vec<f64>> {
        // Images on a line at integer coordinates: distances from h0 are 1..n.
        (0..=n)
            .map(|i| (format!("h{i}"), vec![i as f64, 0.0]))
            .collect()
    }

    #[test]
    fn nn_proxies_take_fourth_and_sixth_neighbors() {
        let features = line_features(8); // h0..h8
        let pair = PairLabel {
            pair_id: "p1".into(),
            image_a: "h0".into(),
            image_b: "h8".into(),
            label: 1,
        };
        let quad = select_proxies(&features, &pair, ProxyCondition::ViralNn, 0).unwrap();
        // Candidates h1..h7 at distances 1..7 from h0: 4th is h4, 6th is h6.
        assert_eq!(quad.viral_target, "h0");
        assert_eq!(quad.nonviral_target, "h8");
        assert_eq!(quad.proxy_1, "h4");
        assert_eq!(quad.proxy_2, "h6");

        let quad = select_proxies(&features, &pair, ProxyCondition::NonviralNn, 0).unwrap();
        // Distances from h8 over h1..h7 are 7..1: 4th nearest is h4, 6th h2.
        assert_eq!(quad.proxy_1, "h4");
        assert_eq!(quad.proxy_2, "h2");
    }

    #[test]
    fn proxy_distance_ties_break_by_image_id() {
        // b and c are equidistant from a.
        let features: BTreeMap<ImageId, Vec<f64>> = [
            ("a", vec![0.0]),
            ("b", vec![1.0]),
            ("c", vec![-1.0]),
            ("d", vec![2.0]),
            ("e", vec![-2.0]),
            ("f", vec![3.0]),
            ("g", vec![-3.0]),
            ("h", vec![4.0]),
            ("z", vec![10.0]),
        ]
        .into_iter()
        .map(|(id, v)| (id.to_string(), v))
        .collect();
        let pair = PairLabel {
            pair_id: "p".into(),
            image_a: "a".into(),
            image_b: "z".into(),
            label: 1,
        };
        let quad = select_proxies(&features, &pair, ProxyCondition::ViralNn, 0).unwrap();
        // Sorted candidates from a: b, c (tie, id order), d, e (tie), f, g...
        assert_eq!(quad.proxy_1, "e");
        assert_eq!(quad.proxy_2, "g");
    }

    #[test]
    fn random_proxies_are_seeded_distinct_and_never_targets() {
        let features = line_features(10);
        let pair = PairLabel {
            pair_id: "p".into(),
            image_a: "h3".into(),
            image_b: "h7".into(),
            label: -1,
        };
        let a = select_proxies(&features, &pair, ProxyCondition::Random, 9).unwrap();
        let b = select_proxies(&features, &pair, ProxyCondition::Random, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.viral_target, "h7");
        assert_eq!(a.nonviral_target, "h3");
        assert_ne!(a.proxy_1, a.proxy_2);
        for p in [&a.proxy_1, &a.proxy_2] {
            assert_ne!(p, "h3");
            assert_ne!(p, "h7");
        }
    }

    #[test]
    fn too_few_proxy_candidates_is_an_error() {
        let features = line_features(7); // 8 images, 6 candidates after targets
        let pair = PairLabel {
            pair_id: "p".into(),
            image_a: "h0".into(),
            image_b: "h7".into(),
            label: 1,
        };
        assert_eq!(
            select_proxies(&features, &pair, ProxyCondition::ViralNn, 0),
            Err(DatasetError::TooFewCandidates { needed: 7, found: 6 })
        );
    }

    #[test]
    fn generator_spec_parses_and_validates() {
        let spec = GeneratorSpec::from_config_text(
            "# corpus shape\nn_images = 40\nn_categories=3\nresub_dist=uniform:1,8\nscore_dist=normal:20,5\nseed=99\n",
        )
        .unwrap();
        assert_eq!(spec.n_images, 40);
        assert_eq!(spec.resub_dist, ResubDist::Uniform { lo: 1, hi: 8 });
        assert_eq!(spec.score_dist, ScoreDist::Normal { mu: 20.0, sigma: 5.0 });
        assert_eq!(spec.seed, 99);

        for bad in [
            "n_images=0\nn_categories=1\nresub_dist=uniform:1,4\nscore_dist=uniform:0,9\nseed=1",
            "n_images=5\nn_categories=1\nresub_dist=uniform:4,1\nscore_dist=uniform:0,9\nseed=1",
            "n_images=5\nn_categories=1\nresub_dist=geometric:1.5\nscore_dist=uniform:0,9\nseed=1",
            "n_images=5\nn_categories=1\nresub_dist=uniform:1,4\nscore_dist=poisson:3,1\nseed=1",
            "n_images=5\nn_categories=1\nresub_dist=uniform:1,4\nscore_dist=uniform:0,9",
        ] {
            assert!(matches!(
                GeneratorSpec::from_config_text(bad),
                Err(DatasetError::BadSpec(_))
            ));
        }
    }

    #[test]
    fn minimal_spec_generates_a_single_valid_submission() {
        let spec = GeneratorSpec {
            n_images: 1,
            n_categories: 1,
            resub_dist: ResubDist::Uniform { lo: 1, hi: 1 },
            score_dist: ScoreDist::Uniform { lo: 5.0, hi: 10.0 },
            seed: 0,
        };
        let (subs, truth) = generate_synthetic_corpus(&spec, 0).unwrap();
        assert_eq!(subs.len(), 1);
        assert_eq!(truth.resubmissions["img00000"], 1);
        let corpus = validate_corpus(&subs, 1).unwrap();
        assert_eq!(corpus.n_images(), 1);
    }

    #[test]
    fn generated_corpora_validate_and_are_seed_deterministic() {
        let spec = GeneratorSpec {
            n_images: 60,
            n_categories: 4,
            resub_dist: ResubDist::Geometric { p: 0.35 },
            score_dist: ScoreDist::Normal { mu: 30.0, sigma: 10.0 },
            seed: 5,
        };
        let (subs_a, truth_a) = generate_synthetic_corpus(&spec, 5).unwrap();
        let (subs_b, truth_b) = generate_synthetic_corpus(&spec, 5).unwrap();
        assert_eq!(subs_a, subs_b);
        assert_eq!(truth_a, truth_b);

        let (subs_c, _) = generate_synthetic_corpus(&spec, 6).unwrap();
        assert_ne!(subs_a, subs_c);

        let corpus = validate_corpus(&subs_a, 1).unwrap();
        assert_eq!(corpus.n_images(), 60);
        for (id, record) in &corpus.images {
            assert_eq!(record.resubmissions(), truth_a.resubmissions[id]);
        }
    }

    #[test]
    fn planted_latents_drive_the_virality_ranking() {
        let spec = GeneratorSpec {
            n_images: 80,
            n_categories: 3,
            resub_dist: ResubDist::Uniform { lo: 1, hi: 12 },
            score_dist: ScoreDist::Uniform { lo: 10.0, hi: 40.0 },
            seed: 0,
        };
        let (subs, truth) = generate_synthetic_corpus(&spec, 21).unwrap();
        let corpus = validate_corpus(&subs, 1).unwrap();
        let ctx = ScoreContext::new(&corpus);

        let ids: Vec<&String> = truth.viralness.keys().collect();
        let latents: Vec<f64> = ids.iter().map(|id| truth.viralness[*id]).collect();
        let viralities: Vec<f64> = ids
            .iter()
            .map(|id| ctx.virality_score(id).unwrap())
            .collect();
        let rho = spearman(&latents, &viralities);
        assert!(rho > 0.6, "latent viralness should drive V ranking, rho={rho}");
    }

    /// Rank correlation with average ranks for ties; test-local on purpose.
    fn spearman(x: &[f64], y: &[f64]) -> f64 {
        fn ranks(v: &[f64]) -> Vec<f64> {
            let mut idx: Vec<usize> = (0..v.len()).collect();
            idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
            let mut r = vec![0.0; v.len()];
            let mut i = 0;
            while i < idx.len() {
                let mut j = i;
                while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                    j += 1;
                }
                let avg = (i + j) as f64 / 2.0 + 1.0;
                for &k in &idx[i..=j] {
                    r[k] = avg;
                }
                i = j + 1;
            }
            r
        }
        let rx = ranks(x);
        let ry = ranks(y);
        let n = rx.len() as f64;
        let mx = rx.iter().sum::<f64>() / n;
        let my = ry.iter().sum::<f64>() / n;
        let mut num = 0.0;
        let mut dx = 0.0;
        let mut dy = 0.0;
        for i in 0..rx.len() {
            num += (rx[i] - mx) * (ry[i] - my);
            dx += (rx[i] - mx).powi(2);
            dy += (ry[i] - my).powi(2);
        }
        num / (dx * dy).sqrt()
    }
}
