//! Subcommand argument structs and implementations.
//!
//! Every command validates its inputs up front (nothing is written when an
//! input is missing), computes its outputs in memory, then takes the output
//! lock and writes each file atomically.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;

use viral_core::attributes::{
    aggregate_annotations, correlations_to_csv, greedy_select, AttributeMatrix, ComboMode,
    GreedyOptions,
};
use viral_core::datasets::{
    build_category_dataset, build_dichotomy, build_random_mix_pairs, build_topbottom_pairs,
    category_dataset_to_csv, generate_synthetic_corpus, proxies_to_csv, select_proxies,
    GeneratorSpec, ProxyCondition, RandomMixOptions,
};
use viral_core::defaults;
use viral_core::eval::{confusion, comparison_csv, comparison_table, ComparisonRow};
use viral_core::fmt::sig12;
use viral_core::ingest::{
    feature_map, parse_annotations, parse_features, parse_pairs, parse_submissions,
    write_submissions_jsonl, IngestReport, SubmissionFormat,
};
use viral_core::learn::{
    accuracy_csv, cross_validate_linear, pair_features, predict, read_model,
    train_attribute_virality, train_linear_traced, train_relative_attribute, write_model,
    CvSpec, TrainConfig,
};
use viral_core::model::{
    validate_corpus, AttributeAnnotation, Direction, PairLabel, SignedAttribute, Submission,
};
use viral_core::scoring::{ScoreContext, ScoreTable};

use crate::config::Settings;
use crate::errors::CliError;
use crate::files::{read_input, require_inputs, write_atomic, OutLock};

fn submission_format(path: &Path, flag: Option<&str>) -> Result<SubmissionFormat, CliError> {
    match flag {
        Some(s) => s
            .parse()
            .map_err(|e: viral_core::ingest::IngestError| CliError::usage(e.to_string())),
        None => Ok(
            if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
                SubmissionFormat::Csv
            } else {
                SubmissionFormat::Jsonl
            },
        ),
    }
}

fn print_report(path: &Path, report: &IngestReport) {
    println!("{}: {}", path.display(), report.summary());
}

fn load_submissions(path: &Path, format: Option<&str>) -> Result<Vec<Submission>, CliError> {
    let format = submission_format(path, format)?;
    let text = read_input(path)?;
    let (subs, report) = parse_submissions(text.as_bytes(), format)?;
    print_report(path, &report);
    Ok(subs)
}

fn load_pairs(path: &Path) -> Result<Vec<PairLabel>, CliError> {
    let text = read_input(path)?;
    let (pairs, report) = parse_pairs(text.as_bytes())?;
    print_report(path, &report);
    Ok(pairs)
}

fn load_annotations(path: &Path) -> Result<Vec<AttributeAnnotation>, CliError> {
    let text = read_input(path)?;
    let (annotations, report) = parse_annotations(text.as_bytes())?;
    print_report(path, &report);
    Ok(annotations)
}

fn load_feature_map(path: &Path) -> Result<BTreeMap<String, Vec<f64>>, CliError> {
    let text = read_input(path)?;
    let (features, report) = parse_features(text.as_bytes())?;
    print_report(path, &report);
    Ok(feature_map(features))
}

fn load_score_table(path: &Path) -> Result<ScoreTable, CliError> {
    Ok(ScoreTable::from_csv(&read_input(path)?)?)
}

fn parse_signed_attribute(s: &str) -> Result<SignedAttribute, CliError> {
    let usage = || {
        CliError::usage(format!(
            "expected up:NAME or down:NAME for a signed attribute, found {s:?}"
        ))
    };
    let (dir, name) = s.split_once(':').ok_or_else(usage)?;
    if name.is_empty() {
        return Err(usage());
    }
    let direction = match dir {
        "up" => Direction::Up,
        "down" => Direction::Down,
        _ => return Err(usage()),
    };
    Ok(SignedAttribute {
        attribute: name.to_string(),
        direction,
    })
}

/// ----- score -----

#[derive(Args, Debug)]
pub struct ScoreArgs {
    /// Submission dump to score.
    #[arg(long)]
    pub input: PathBuf,
    /// Input format, `jsonl` or `csv`; inferred from the extension if unset.
    #[arg(long)]
    pub format: Option<String>,
    /// Categories with fewer total submissions are dropped.
    #[arg(long)]
    pub min_category_submissions: Option<usize>,
    /// Score table destination.
    #[arg(long)]
    pub out: PathBuf,
    /// key=value settings file; flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn score(args: &ScoreArgs) -> Result<(), CliError> {
    let settings = Settings::load(args.config.as_deref())?;
    let min_cat = settings.resolve(
        args.min_category_submissions,
        "min_category_submissions",
        defaults::MIN_CATEGORY_SUBMISSIONS,
    )?;
    let submissions = load_submissions(&args.input, args.format.as_deref())?;
    let corpus = validate_corpus(&submissions, min_cat)?;
    let table = ScoreContext::new(&corpus).score_table();
    let _lock = OutLock::for_file(&args.out)?;
    write_atomic(&args.out, &table.to_csv())?;
    println!(
        "scored {} images over {} submissions in {} categories (score offset {})",
        corpus.n_images(),
        corpus.n_submissions(),
        corpus.categories.len(),
        corpus.score_offset
    );
    Ok(())
}

/// ----- dataset -----

#[derive(Args, Debug)]
pub struct DatasetArgs {
    /// One of `dichotomy`, `randommix`, `topbottom`, `category`.
    #[arg(long)]
    pub mode: String,
    /// Score table (all modes except `category`).
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Submission dump (`category` mode).
    #[arg(long)]
    pub submissions: Option<PathBuf>,
    /// Submission format override.
    #[arg(long)]
    pub format: Option<String>,
    /// Images per extreme of the dichotomy.
    #[arg(long)]
    pub k: Option<usize>,
    /// Pairs to generate (`randommix`).
    #[arg(long)]
    pub n_pairs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Keep pairs whose members are both dichotomy extremes (`randommix`).
    #[arg(long)]
    pub no_filter_extremes: bool,
    /// Comma-separated category names (`category` mode; default all).
    #[arg(long)]
    pub categories: Option<String>,
    /// Images per category (`category` mode).
    #[arg(long)]
    pub per_category: Option<usize>,
    #[arg(long)]
    pub min_category_submissions: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn dataset(args: &DatasetArgs) -> Result<(), CliError> {
    let settings = Settings::load(args.config.as_deref())?;
    let k = settings.resolve(args.k, "k", defaults::DICHOTOMY_K)?;
    let seed = settings.resolve(args.seed, "seed", 0)?;

    let scores_of = |path: &Option<PathBuf>| -> Result<ScoreTable, CliError> {
        let path = path
            .as_deref()
            .ok_or_else(|| CliError::usage(format!("--scores is required for --mode {}", args.mode)))?;
        load_score_table(path)
    };

    let (content, summary) = match args.mode.as_str() {
        "dichotomy" => {
            let table = scores_of(&args.scores)?;
            let d = build_dichotomy(&table, k)?;
            let line = format!("dichotomy of {} images per side", d.k());
            (d.to_csv(), line)
        }
        "randommix" => {
            let table = scores_of(&args.scores)?;
            let d = build_dichotomy(&table, k)?;
            let n_pairs = settings.resolve(args.n_pairs, "n_pairs", defaults::RANDOM_MIX_PAIRS)?;
            let set = build_random_mix_pairs(
                &table,
                &d,
                RandomMixOptions {
                    n_pairs,
                    seed,
                    filter_extremes: !args.no_filter_extremes,
                },
            )?;
            let line = format!("{} random-mix pairs", set.pairs.len());
            (set.to_csv(), line)
        }
        "topbottom" => {
            let table = scores_of(&args.scores)?;
            let d = build_dichotomy(&table, k)?;
            let set = build_topbottom_pairs(&d, seed);
            let line = format!("{} top-bottom pairs", set.pairs.len());
            (set.to_csv(), line)
        }
        "category" => {
            let path = args.submissions.as_deref().ok_or_else(|| {
                CliError::usage("--submissions is required for --mode category")
            })?;
            let min_cat = settings.resolve(
                args.min_category_submissions,
                "min_category_submissions",
                defaults::MIN_CATEGORY_SUBMISSIONS,
            )?;
            let per_category =
                settings.resolve(args.per_category, "per_category", defaults::PER_CATEGORY_IMAGES)?;
            let submissions = load_submissions(path, args.format.as_deref())?;
            let corpus = validate_corpus(&submissions, min_cat)?;
            let ctx = ScoreContext::new(&corpus);
            let categories: Vec<String> = match &args.categories {
                Some(list) => list.split(',').map(|c| c.trim().to_string()).collect(),
                None => corpus.categories.iter().cloned().collect(),
            };
            let picks = build_category_dataset(&ctx, &categories, per_category)?;
            let line = format!(
                "{} categories, {} images each",
                picks.len(),
                per_category
            );
            (category_dataset_to_csv(&picks), line)
        }
        other => {
            return Err(CliError::usage(format!(
                "unknown dataset mode {other:?} (expected dichotomy, randommix, topbottom, or category)"
            )))
        }
    };

    let _lock = OutLock::for_file(&args.out)?;
    write_atomic(&args.out, &content)?;
    println!("{summary} -> {}", args.out.display());
    Ok(())
}

/// ----- correlate -----

#[derive(Args, Debug)]
pub struct CorrelateArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn correlate(args: &CorrelateArgs) -> Result<(), CliError> {
    require_inputs([args.pairs.as_path(), args.annotations.as_path()])?;
    let pairs = load_pairs(&args.pairs)?;
    let annotations = load_annotations(&args.annotations)?;
    let matrix = aggregate_annotations(&annotations, &pairs)?;
    let _lock = OutLock::for_file(&args.out)?;
    write_atomic(&args.out, &correlations_to_csv(&matrix))?;
    println!(
        "{} attributes over {} pairs ({} unannotated cells)",
        matrix.n_attributes(),
        matrix.n_pairs(),
        matrix.coverage_gaps()
    );
    Ok(())
}

/// ----- greedy -----

#[derive(Args, Debug)]
pub struct GreedyArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub annotations: PathBuf,
    /// Combination mode, `sum` or `force`.
    #[arg(long)]
    pub mode: Option<String>,
    /// Stop after this many attributes.
    #[arg(long)]
    pub max_size: Option<usize>,
    /// Force the first pick, written `up:NAME` or `down:NAME`.
    #[arg(long)]
    pub seed_attribute: Option<String>,
    /// Attribute names to leave out (repeatable).
    #[arg(long)]
    pub exclude: Vec<String>,
    /// Consider the attributes excluded by default too.
    #[arg(long)]
    pub no_default_exclusions: bool,
    /// Required correlation improvement per step.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn greedy(args: &GreedyArgs) -> Result<(), CliError> {
    let settings = Settings::load(args.config.as_deref())?;
    require_inputs([args.pairs.as_path(), args.annotations.as_path()])?;
    let pairs = load_pairs(&args.pairs)?;
    let annotations = load_annotations(&args.annotations)?;
    let matrix = aggregate_annotations(&annotations, &pairs)?;

    let mode: ComboMode = settings
        .resolve(args.mode.clone(), "mode", "sum".to_string())?
        .parse()
        .map_err(CliError::usage)?;
    let mut exclusions: std::collections::BTreeSet<String> =
        args.exclude.iter().cloned().collect();
    if !args.no_default_exclusions {
        exclusions.extend(defaults::EXCLUDED_ATTRIBUTES.iter().map(|s| s.to_string()));
    }
    let seed_attribute = settings
        .resolve_optional(args.seed_attribute.clone(), "seed_attribute")?
        .map(|s| parse_signed_attribute(&s))
        .transpose()?;
    let options = GreedyOptions {
        max_size: settings.resolve(args.max_size, "max_size", usize::MAX)?,
        mode,
        seed_attribute,
        exclusions,
        epsilon: settings.resolve(args.epsilon, "epsilon", 0.0)?,
    };
    let trace = greedy_select(&matrix, &options)?;

    let _lock = OutLock::for_file(&args.out)?;
    write_atomic(&args.out, &trace.to_csv())?;
    let combo: Vec<String> = trace
        .steps
        .iter()
        .map(|s| s.attribute.to_string())
        .collect();
    println!(
        "selected [{}] with correlation {}",
        combo.join(", "),
        sig12(trace.steps.last().expect("at least one step").correlation)
    );
    Ok(())
}

/// ----- train -----

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub features: PathBuf,
    /// Train pairwise on labeled pairs (feature differences).
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Train on per-image labels (`image_id,label` rows).
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub regularization: Option<f64>,
    #[arg(long)]
    pub epochs: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Learn a free intercept; defaults to false for pairwise training and
    /// true for per-image labels.
    #[arg(long)]
    pub fit_bias: Option<bool>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn parse_labels_csv(path: &Path) -> Result<Vec<(String, i8)>, CliError> {
    let text = read_input(path)?;
    let mut rows = Vec::new();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::data("E_BAD_ROW", e.to_string()))?;
        let line = i + 1;
        if record.len() != 2 || record[0].is_empty() {
            return Err(CliError::data(
                "E_BAD_ROW",
                format!("{} line {line}: expected image_id,label", path.display()),
            ));
        }
        let label = match record[1].trim() {
            "1" | "+1" => 1,
            "-1" => -1,
            other => {
                return Err(CliError::data(
                    "E_BAD_LABEL",
                    format!("{} line {line}: label {other:?} is not -1 or +1", path.display()),
                ))
            }
        };
        rows.push((record[0].to_string(), label));
    }
    Ok(rows)
}

pub fn train(args: &TrainArgs) -> Result<(), CliError> {
    let settings = Settings::load(args.config.as_deref())?;
    let features = load_feature_map(&args.features)?;

    let (xs, ys, default_bias): (Vec<Vec<f64>>, Vec<i8>, bool) =
        match (&args.pairs, &args.labels) {
            (Some(_), Some(_)) | (None, None) => {
                return Err(CliError::usage("pass exactly one of --pairs or --labels"))
            }
            (Some(pairs_path), None) => {
                let pairs = load_pairs(pairs_path)?;
                let xs = pairs
                    .iter()
                    .map(|p| pair_features(&features, p))
                    .collect::<Result<Vec<_>, _>>()?;
                let ys = pairs.iter().map(|p| p.label).collect();
                (xs, ys, false)
            }
            (None, Some(labels_path)) => {
                let rows = parse_labels_csv(labels_path)?;
                let mut xs = Vec::with_capacity(rows.len());
                let mut ys = Vec::with_capacity(rows.len());
                for (id, label) in rows {
                    let x = features.get(&id).ok_or_else(|| {
                        CliError::data("E_MISSING_FEATURES", format!("no features for image {id:?}"))
                    })?;
                    xs.push(x.clone());
                    ys.push(label);
                }
                (xs, ys, true)
            }
        };

    let config = TrainConfig {
        regularization: settings.resolve(args.regularization, "regularization", 1e-3)?,
        epochs: settings.resolve(args.epochs, "epochs", 50)?,
        seed: settings.resolve(args.seed, "seed", 0)?,
        fit_bias: settings.resolve(args.fit_bias, "fit_bias", default_bias)?,
    };
    let (model, trace) = train_linear_traced(&xs, &ys, &config)?;

    let _lock = OutLock::for_file(&args.out)?;
    write_atomic(&args.out, &write_model(&model))?;
    println!(
        "trained on {} samples of dimension {}; final objective {}",
        xs.len(),
        model.dim(),
        sig12(*trace.last().expect("at least one epoch"))
    );
    Ok(())
}

/// ----- predict -----

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    /// Predict pair orientations instead of per-image labels.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn predict_cmd(args: &PredictArgs) -> Result<(), CliError> {
    let mut required = vec![args.model.as_path(), args.features.as_path()];
    required.extend(args.pairs.as_deref());
    require_inputs(required)?;

    let model = read_model(&read_input(&args.model)?)?;
    let features = load_feature_map(&args.features)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    let n;
    match &args.pairs {
        Some(pairs_path) => {
            let pairs = load_pairs(pairs_path)?;
            n = pairs.len();
            for pair in &pairs {
                let x = pair_features(&features, pair)?;
                let (label, margin) = predict(&model, &x)?;
                w.write_record([pair.pair_id.as_str(), &label.to_string(), &sig12(margin)])
                    .expect("csv row");
            }
        }
        None => {
            n = features.len();
            for (id, x) in &features {
                let (label, margin) = predict(&model, x)?;
                w.write_record([id.as_str(), &label.to_string(), &sig12(margin)])
                    .expect("csv row");
            }
        }
    }
    let content =
        String::from_utf8(w.into_inner().expect("csv flush")).expect("csv output is utf-8");

    let _lock = OutLock::for_file(&args.out)?;
    write_atomic(&args.out, &content)?;
    println!("predicted {n} rows -> {}", args.out.display());
    Ok(())
}

/// ----- cv -----

#[derive(Args, Debug)]
pub struct CvArgs {
    /// One of `pairwise`, `attributes`, `attr-virality`.
    #[arg(long)]
    pub task: String,
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    /// Attribute annotations (required for `attributes` and `attr-virality`).
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub regularization: Option<f64>,
    #[arg(long)]
    pub epochs: Option<u32>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn attribute_file_names(attributes: &[String]) -> Vec<String> {
    let mut taken = std::collections::BTreeSet::new();
    attributes
        .iter()
        .map(|a| {
            let base: String = a
                .chars()
                .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
                .collect();
            let mut name = base.clone();
            let mut i = 1;
            while !taken.insert(name.clone()) {
                i += 1;
                name = format!("{base}_{i}");
            }
            name
        })
        .collect()
}

fn prediction_rows(ids: &[&str], truth: &[i8], pred: &[i8]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for i in 0..ids.len() {
        w.write_record([ids[i], &truth[i].to_string(), &pred[i].to_string()])
            .expect("csv row");
    }
    String::from_utf8(w.into_inner().expect("csv flush")).expect("csv output is utf-8")
}

fn relative_reports(
    features: &BTreeMap<String, Vec<f64>>,
    pairs: &[PairLabel],
    matrix: &AttributeMatrix,
    cv: &CvSpec,
    config: &TrainConfig,
) -> Result<Vec<viral_core::learn::RelativeAttributeReport>, CliError> {
    matrix
        .attributes()
        .iter()
        .map(|attribute| {
            train_relative_attribute(features, pairs, matrix, attribute, cv, config)
                .map_err(CliError::from)
        })
        .collect()
}

pub fn cv(args: &CvArgs) -> Result<(), CliError> {
    let settings = Settings::load(args.config.as_deref())?;
    let needs_annotations = matches!(args.task.as_str(), "attributes" | "attr-virality");
    if !matches!(args.task.as_str(), "pairwise" | "attributes" | "attr-virality") {
        return Err(CliError::usage(format!(
            "unknown cv task {:?} (expected pairwise, attributes, or attr-virality)",
            args.task
        )));
    }
    let annotations_path = match (&args.annotations, needs_annotations) {
        (Some(p), true) => Some(p.as_path()),
        (None, true) => {
            return Err(CliError::usage(format!(
                "--annotations is required for --task {}",
                args.task
            )))
        }
        (_, false) => None,
    };
    let mut required = vec![args.pairs.as_path(), args.features.as_path()];
    required.extend(annotations_path);
    require_inputs(required)?;

    let pairs = load_pairs(&args.pairs)?;
    let features = load_feature_map(&args.features)?;
    let labels: Vec<i8> = pairs.iter().map(|p| p.label).collect();
    let pair_ids: Vec<&str> = pairs.iter().map(|p| p.pair_id.as_str()).collect();

    let cv = CvSpec {
        folds: settings.resolve(args.folds, "folds", defaults::CV_FOLDS)?,
        seed: settings.resolve(args.seed, "seed", 0)?,
    };
    let config = TrainConfig {
        regularization: settings.resolve(args.regularization, "regularization", 1e-3)?,
        epochs: settings.resolve(args.epochs, "epochs", 50)?,
        seed: cv.seed,
        fit_bias: false,
    };

    // (file name, content) pairs, written together at the end.
    let mut outputs: Vec<(String, String)> = Vec::new();
    match args.task.as_str() {
        "pairwise" => {
            let xs = pairs
                .iter()
                .map(|p| pair_features(&features, p))
                .collect::<Result<Vec<_>, _>>()?;
            let report = cross_validate_linear(&xs, &labels, &cv, &config)?;
            outputs.push((
                "accuracy.csv".into(),
                accuracy_csv("pairwise", &report.fold_accuracy, labels.len(), report.accuracy),
            ));
            outputs.push((
                "predictions.csv".into(),
                prediction_rows(&pair_ids, &labels, &report.predictions),
            ));
            outputs.push((
                "confusion.csv".into(),
                confusion(&report.predictions, &labels, &[-1, 1])?.to_csv(),
            ));
            println!(
                "pairwise accuracy {} over {} pairs ({} plan reshuffles)",
                sig12(report.accuracy),
                labels.len(),
                report.seed_bumps
            );
        }
        "attributes" => {
            let annotations = load_annotations(annotations_path.expect("checked above"))?;
            let matrix = aggregate_annotations(&annotations, &pairs)?;
            let reports = relative_reports(&features, &pairs, &matrix, &cv, &config)?;
            let file_names = attribute_file_names(matrix.attributes());

            let mut accuracy = String::new();
            let mut preds = csv::Writer::from_writer(Vec::new());
            for (report, file_name) in reports.iter().zip(&file_names) {
                accuracy += &accuracy_csv(
                    &format!("attr:{}", report.attribute),
                    &report.fold_accuracy,
                    matrix.n_pairs(),
                    report.accuracy3,
                );
                accuracy += &accuracy_csv(
                    &format!("attr2:{}", report.attribute),
                    &[],
                    report.n2,
                    report.accuracy2,
                );
                let truth = matrix.column(&report.attribute)?;
                outputs.push((
                    format!("confusion_{file_name}.csv"),
                    confusion(&report.predictions, &truth, &[-1, 0, 1])?.to_csv(),
                ));
                for (pair_id, pred) in pair_ids.iter().zip(&report.predictions) {
                    preds
                        .write_record([*pair_id, report.attribute.as_str(), &pred.to_string()])
                        .expect("csv row");
                }
                println!(
                    "attribute {:?}: 3-class {} 2-class {} ({} plan reshuffles)",
                    report.attribute,
                    sig12(report.accuracy3),
                    sig12(report.accuracy2),
                    report.seed_bumps
                );
            }
            outputs.push(("accuracy.csv".into(), accuracy));
            outputs.push((
                "attribute_preds.csv".into(),
                String::from_utf8(preds.into_inner().expect("csv flush"))
                    .expect("csv output is utf-8"),
            ));
        }
        "attr-virality" => {
            let annotations = load_annotations(annotations_path.expect("checked above"))?;
            let matrix = aggregate_annotations(&annotations, &pairs)?;
            let reports = relative_reports(&features, &pairs, &matrix, &cv, &config)?;
            let xs: Vec<Vec<f64>> = (0..matrix.n_pairs())
                .map(|row| reports.iter().map(|r| r.predictions[row] as f64).collect())
                .collect();
            let report = train_attribute_virality(&xs, &labels, &cv, &config)?;
            outputs.push((
                "accuracy.csv".into(),
                accuracy_csv(
                    "attr-virality",
                    &report.fold_accuracy,
                    labels.len(),
                    report.accuracy,
                ),
            ));
            outputs.push((
                "predictions.csv".into(),
                prediction_rows(&pair_ids, &labels, &report.predictions),
            ));
            outputs.push((
                "confusion.csv".into(),
                confusion(&report.predictions, &labels, &[-1, 1])?.to_csv(),
            ));
            println!(
                "attr-virality accuracy {} over {} pairs ({} plan reshuffles)",
                sig12(report.accuracy),
                labels.len(),
                report.seed_bumps
            );
        }
        _ => unreachable!("task validated above"),
    }

    let _lock = OutLock::acquire(&args.out_dir)?;
    for (name, content) in &outputs {
        write_atomic(&args.out_dir.join(name), content)?;
    }
    Ok(())
}

/// ----- proxies -----

#[derive(Args, Debug)]
pub struct ProxiesArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    /// One of `viral-nn`, `nonviral-nn`, `random`.
    #[arg(long)]
    pub condition: String,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn proxies(args: &ProxiesArgs) -> Result<(), CliError> {
    let settings = Settings::load(args.config.as_deref())?;
    let condition: ProxyCondition = args.condition.parse().map_err(CliError::usage)?;
    let seed = settings.resolve(args.seed, "seed", 0)?;
    require_inputs([args.pairs.as_path(), args.features.as_path()])?;
    let pairs = load_pairs(&args.pairs)?;
    let features = load_feature_map(&args.features)?;

    let quads = pairs
        .iter()
        .enumerate()
        .map(|(i, pair)| select_proxies(&features, pair, condition, seed.wrapping_add(i as u64)))
        .collect::<Result<Vec<_>, _>>()?;

    let _lock = OutLock::for_file(&args.out)?;
    write_atomic(&args.out, &proxies_to_csv(&quads))?;
    println!(
        "{} {} proxy quads -> {}",
        quads.len(),
        condition.as_str(),
        args.out.display()
    );
    Ok(())
}

/// ----- synth -----

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Generator spec (`key=value`; see the corpus generator docs).
    #[arg(long)]
    pub spec: PathBuf,
    /// Overrides the seed given in the generator file.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn synth(args: &SynthArgs) -> Result<(), CliError> {
    let spec = GeneratorSpec::from_config_text(&read_input(&args.spec)?)?;
    let seed = args.seed.unwrap_or(spec.seed);
    let (submissions, truth) = generate_synthetic_corpus(&spec, seed)?;

    let _lock = OutLock::acquire(&args.out_dir)?;
    write_atomic(
        &args.out_dir.join("submissions.jsonl"),
        &write_submissions_jsonl(&submissions),
    )?;
    write_atomic(&args.out_dir.join("truth.csv"), &truth.to_csv())?;
    println!(
        "generated {} submissions for {} images (seed {seed}) -> {}",
        submissions.len(),
        truth.viralness.len(),
        args.out_dir.display()
    );
    Ok(())
}

/// ----- report -----

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// `method:dataset:path` where path is an accuracy.csv; repeatable.
    #[arg(long = "entry", required = true)]
    pub entries: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn report(args: &ReportArgs) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for entry in &args.entries {
        let mut parts = entry.splitn(3, ':');
        let (method, dataset, path) = match (parts.next(), parts.next(), parts.next()) {
            (Some(m), Some(d), Some(p)) if !m.is_empty() && !d.is_empty() && !p.is_empty() => {
                (m, d, PathBuf::from(p))
            }
            _ => {
                return Err(CliError::usage(format!(
                    "entry {entry:?} must look like method:dataset:path"
                )))
            }
        };
        let text = read_input(&path)?;
        let mut found = Vec::new();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(text.as_bytes());
        for record in reader.records() {
            let record = record.map_err(|e| CliError::data("E_BAD_ROW", e.to_string()))?;
            if record.len() == 4 && &record[1] == "all" {
                let n: usize = record[2].parse().map_err(|_| {
                    CliError::data("E_BAD_ROW", format!("{}: bad n in {:?}", path.display(), &record))
                })?;
                let accuracy: f64 = record[3].parse().map_err(|_| {
                    CliError::data(
                        "E_BAD_ROW",
                        format!("{}: bad accuracy in {:?}", path.display(), &record),
                    )
                })?;
                found.push((record[0].to_string(), n, accuracy));
            }
        }
        if found.is_empty() {
            return Err(CliError::data(
                "E_BAD_ROW",
                format!("{} has no `all` summary row", path.display()),
            ));
        }
        let lone = found.len() == 1;
        for (task, n, accuracy) in found {
            rows.push(ComparisonRow {
                method: if lone { method.to_string() } else { format!("{method}:{task}") },
                dataset: dataset.to_string(),
                n,
                accuracy,
            });
        }
    }

    let _lock = OutLock::for_file(&args.out)?;
    write_atomic(&args.out, &comparison_csv(&rows))?;
    print!("{}", comparison_table(&rows));
    Ok(())
}
