//! Parsers for the on-disk formats: submission dumps (JSON lines or CSV),
//! pair label files, per-worker attribute annotations, and feature tables.
//!
//! Crawled data is dirty, so row-level problems never abort a parse. Bad rows
//! are skipped and tallied in an [`IngestReport`] keyed by rejection reason;
//! only stream-level problems (I/O, bad UTF-8, a missing feature header) are
//! hard errors.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use serde_json::Value;
use thiserror::Error;

use crate::model::{AttributeAnnotation, FeatureVector, PairLabel, Submission};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("unsupported input format {0:?} (expected jsonl or csv)")]
    UnsupportedFormat(String),
    #[error("missing or malformed feature header, expected '#dim=<N>' with N >= 1")]
    BadHeader,
}

impl IngestError {
    pub fn code(&self) -> &'static str {
        match self {
            IngestError::Io(_) => "IO_FAILURE",
            IngestError::UnsupportedFormat(_) => "UNSUPPORTED_FORMAT",
            IngestError::BadHeader => "BAD_HEADER",
        }
    }
}

/// Why a row was rejected. Reported, not raised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RejectReason {
    BadJson,
    NotAnObject,
    MissingField,
    ExtraField,
    BadString,
    EmptyField,
    BadNumber,
    BadLabel,
    SelfPair,
    WrongArity,
    DimensionMismatch,
    NonFiniteValue,
    DuplicateImage,
    BadRow,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::BadJson => "BAD_JSON",
            RejectReason::NotAnObject => "NOT_AN_OBJECT",
            RejectReason::MissingField => "MISSING_FIELD",
            RejectReason::ExtraField => "EXTRA_FIELD",
            RejectReason::BadString => "BAD_STRING",
            RejectReason::EmptyField => "EMPTY_FIELD",
            RejectReason::BadNumber => "BAD_NUMBER",
            RejectReason::BadLabel => "BAD_LABEL",
            RejectReason::SelfPair => "SELF_PAIR",
            RejectReason::WrongArity => "WRONG_ARITY",
            RejectReason::DimensionMismatch => "DIMENSION_MISMATCH",
            RejectReason::NonFiniteValue => "NON_FINITE_VALUE",
            RejectReason::DuplicateImage => "DUPLICATE_IMAGE",
            RejectReason::BadRow => "BAD_ROW",
        }
    }
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Bookkeeping for one parse: `records_read` counts every non-blank data row,
/// accepted or not, so `records_read - records_rejected` rows were kept.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct IngestReport {
    pub records_read: usize,
    pub records_rejected: usize,
    pub rejection_reasons: BTreeMap<RejectReason, usize>,
}

impl IngestReport {
    fn reject(&mut self, reason: RejectReason) {
        self.records_rejected += 1;
        *self.rejection_reasons.entry(reason).or_insert(0) += 1;
    }

    pub fn accepted(&self) -> usize {
        self.records_read - self.records_rejected
    }

    /// One-line summary like `read=20 accepted=19 rejected=1 [BAD_LABEL x1]`.
    pub fn summary(&self) -> String {
        let mut line = format!(
            "read={} accepted={} rejected={}",
            self.records_read,
            self.accepted(),
            self.records_rejected
        );
        if !self.rejection_reasons.is_empty() {
            let reasons: Vec<String> = self
                .rejection_reasons
                .iter()
                .map(|(r, n)| format!("{r} x{n}"))
                .collect();
            line.push_str(&format!(" [{}]", reasons.join(", ")));
        }
        line
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubmissionFormat {
    Jsonl,
    Csv,
}

impl std::str::FromStr for SubmissionFormat {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, IngestError> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" => Ok(SubmissionFormat::Jsonl),
            "csv" => Ok(SubmissionFormat::Csv),
            other => Err(IngestError::UnsupportedFormat(other.to_string())),
        }
    }
}

fn read_text(mut stream: impl Read) -> Result<String, IngestError> {
    let mut text = String::new();
    stream.read_to_string(&mut text)?;
    Ok(text)
}

/// Splits CSV text into records, tolerating CRLF and quoted fields. Blank
/// lines are not records.
fn csv_records(text: &str) -> Vec<Result<csv::StringRecord, csv::Error>> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes())
        .into_records()
        .collect()
}

fn field_u64(raw: &str) -> Result<u64, RejectReason> {
    raw.trim().parse::<u64>().map_err(|_| RejectReason::BadNumber)
}

fn nonempty(raw: &str) -> Result<String, RejectReason> {
    if raw.is_empty() {
        Err(RejectReason::EmptyField)
    } else {
        Ok(raw.to_string())
    }
}

const SUBMISSION_FIELDS: [&str; 5] = ["image_id", "category", "hour_bucket", "ups", "downs"];

fn submission_from_json(line: &str) -> Result<Submission, RejectReason> {
    let value: Value = serde_json::from_str(line).map_err(|_| RejectReason::BadJson)?;
    let object = value.as_object().ok_or(RejectReason::NotAnObject)?;
    for key in SUBMISSION_FIELDS {
        if !object.contains_key(key) {
            return Err(RejectReason::MissingField);
        }
    }
    if object.len() != SUBMISSION_FIELDS.len() {
        return Err(RejectReason::ExtraField);
    }
    let string_field = |key: &str| -> Result<String, RejectReason> {
        let raw = object[key].as_str().ok_or(RejectReason::BadString)?;
        nonempty(raw)
    };
    let u64_field = |key: &str| -> Result<u64, RejectReason> {
        object[key].as_u64().ok_or(RejectReason::BadNumber)
    };
    Ok(Submission {
        image_id: string_field("image_id")?,
        category: string_field("category")?,
        hour_bucket: u64_field("hour_bucket")?,
        ups: u64_field("ups")?,
        downs: u64_field("downs")?,
    })
}

fn submission_from_record(record: &csv::StringRecord) -> Result<Submission, RejectReason> {
    if record.len() != 5 {
        return Err(RejectReason::WrongArity);
    }
    Ok(Submission {
        image_id: nonempty(&record[0])?,
        category: nonempty(&record[1])?,
        hour_bucket: field_u64(&record[2])?,
        ups: field_u64(&record[3])?,
        downs: field_u64(&record[4])?,
    })
}

/// Parses a submission dump. JSON lines carry one object per line with
/// exactly the five submission fields; CSV rows are
/// `image_id,category,hour_bucket,ups,downs` with no header row.
pub fn parse_submissions(
    stream: impl Read,
    format: SubmissionFormat,
) -> Result<(Vec<Submission>, IngestReport), IngestError> {
    let text = read_text(stream)?;
    let mut out = Vec::new();
    let mut report = IngestReport::default();
    match format {
        SubmissionFormat::Jsonl => {
            for line in text.lines() {
                let line = line.trim();
                if line.is_empty() {
                    continue;
                }
                report.records_read += 1;
                match submission_from_json(line) {
                    Ok(s) => out.push(s),
                    Err(reason) => report.reject(reason),
                }
            }
        }
        SubmissionFormat::Csv => {
            for record in csv_records(&text) {
                report.records_read += 1;
                match record {
                    Ok(rec) => match submission_from_record(&rec) {
                        Ok(s) => out.push(s),
                        Err(reason) => report.reject(reason),
                    },
                    Err(_) => report.reject(RejectReason::BadRow),
                }
            }
        }
    }
    Ok((out, report))
}

/// Parses `pair_id,image_a,image_b,label` rows; label must be -1 or +1 and
/// the two images must differ.
pub fn parse_pairs(stream: impl Read) -> Result<(Vec<PairLabel>, IngestReport), IngestError> {
    let text = read_text(stream)?;
    let mut out = Vec::new();
    let mut report = IngestReport::default();
    for record in csv_records(&text) {
        report.records_read += 1;
        let rec = match record {
            Ok(rec) => rec,
            Err(_) => {
                report.reject(RejectReason::BadRow);
                continue;
            }
        };
        match pair_from_record(&rec) {
            Ok(p) => out.push(p),
            Err(reason) => report.reject(reason),
        }
    }
    Ok((out, report))
}

fn pair_from_record(record: &csv::StringRecord) -> Result<PairLabel, RejectReason> {
    if record.len() != 4 {
        return Err(RejectReason::WrongArity);
    }
    let pair = PairLabel {
        pair_id: nonempty(&record[0])?,
        image_a: nonempty(&record[1])?,
        image_b: nonempty(&record[2])?,
        label: match record[3].trim() {
            "1" | "+1" => 1,
            "-1" => -1,
            _ => return Err(RejectReason::BadLabel),
        },
    };
    if pair.image_a == pair.image_b {
        return Err(RejectReason::SelfPair);
    }
    Ok(pair)
}

/// Parses `pair_id,attribute,worker_id,label` rows; label must be -1, 0,
/// or +1.
pub fn parse_annotations(
    stream: impl Read,
) -> Result<(Vec<AttributeAnnotation>, IngestReport), IngestError> {
    let text = read_text(stream)?;
    let mut out = Vec::new();
    let mut report = IngestReport::default();
    for record in csv_records(&text) {
        report.records_read += 1;
        let rec = match record {
            Ok(rec) => rec,
            Err(_) => {
                report.reject(RejectReason::BadRow);
                continue;
            }
        };
        match annotation_from_record(&rec) {
            Ok(a) => out.push(a),
            Err(reason) => report.reject(reason),
        }
    }
    Ok((out, report))
}

fn annotation_from_record(record: &csv::StringRecord) -> Result<AttributeAnnotation, RejectReason> {
    if record.len() != 4 {
        return Err(RejectReason::WrongArity);
    }
    Ok(AttributeAnnotation {
        pair_id: nonempty(&record[0])?,
        attribute: nonempty(&record[1])?,
        worker_id: nonempty(&record[2])?,
        label: match record[3].trim() {
            "1" | "+1" => 1,
            "0" => 0,
            "-1" => -1,
            _ => return Err(RejectReason::BadLabel),
        },
    })
}

/// Parses a feature table. The first line must be `#dim=<N>`; every data row
/// is `image_id,v1,...,vN`. Rows with the wrong arity, non-finite values, or
/// a repeated image id are rejected.
pub fn parse_features(
    stream: impl Read,
) -> Result<(Vec<FeatureVector>, IngestReport), IngestError> {
    let text = read_text(stream)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or(IngestError::BadHeader)?.trim();
    let dim: usize = header
        .strip_prefix("#dim=")
        .and_then(|n| n.trim().parse().ok())
        .filter(|&n| n >= 1)
        .ok_or(IngestError::BadHeader)?;

    let body: String = lines.collect::<Vec<_>>().join("\n");
    let mut out: Vec<FeatureVector> = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut report = IngestReport::default();
    for record in csv_records(&body) {
        report.records_read += 1;
        let rec = match record {
            Ok(rec) => rec,
            Err(_) => {
                report.reject(RejectReason::BadRow);
                continue;
            }
        };
        match feature_from_record(&rec, dim) {
            Ok(fv) => {
                if seen.insert(fv.image_id.clone()) {
                    out.push(fv);
                } else {
                    report.reject(RejectReason::DuplicateImage);
                }
            }
            Err(reason) => report.reject(reason),
        }
    }
    Ok((out, report))
}

fn feature_from_record(record: &csv::StringRecord, dim: usize) -> Result<FeatureVector, RejectReason> {
    if record.len() != dim + 1 {
        return Err(RejectReason::DimensionMismatch);
    }
    let image_id = nonempty(&record[0])?;
    let mut values = Vec::with_capacity(dim);
    for raw in record.iter().skip(1) {
        let v: f64 = raw.trim().parse().map_err(|_| RejectReason::BadNumber)?;
        if !v.is_finite() {
            return Err(RejectReason::NonFiniteValue);
        }
        values.push(v);
    }
    Ok(FeatureVector { image_id, values })
}

// ---- serializers ----------------------------------------------------------
//
// Floats are written with Rust's shortest round-trip representation, so
// parse(write(x)) reproduces x bit for bit.

pub fn write_submissions_jsonl(submissions: &[Submission]) -> String {
    let mut out = String::new();
    for s in submissions {
        out.push_str(&serde_json::to_string(s).expect("submission serializes"));
        out.push('\n');
    }
    out
}

fn finish_csv(writer: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(writer.into_inner().expect("csv flush")).expect("csv output is utf-8")
}

pub fn write_submissions_csv(submissions: &[Submission]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for s in submissions {
        w.write_record([
            s.image_id.as_str(),
            s.category.as_str(),
            &s.hour_bucket.to_string(),
            &s.ups.to_string(),
            &s.downs.to_string(),
        ])
        .expect("csv row");
    }
    finish_csv(w)
}

pub fn write_pairs_csv(pairs: &[PairLabel]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in pairs {
        w.write_record([
            p.pair_id.as_str(),
            p.image_a.as_str(),
            p.image_b.as_str(),
            &p.label.to_string(),
        ])
        .expect("csv row");
    }
    finish_csv(w)
}

pub fn write_annotations_csv(annotations: &[AttributeAnnotation]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for a in annotations {
        w.write_record([
            a.pair_id.as_str(),
            a.attribute.as_str(),
            a.worker_id.as_str(),
            &a.label.to_string(),
        ])
        .expect("csv row");
    }
    finish_csv(w)
}

pub fn write_features_csv(dim: usize, features: &[FeatureVector]) -> String {
    let mut out = format!("#dim={dim}\n");
    let mut w = csv::Writer::from_writer(Vec::new());
    for fv in features {
        debug_assert_eq!(fv.values.len(), dim);
        let mut row = vec![fv.image_id.clone()];
        row.extend(fv.values.iter().map(|v| v.to_string()));
        w.write_record(&row).expect("csv row");
    }
    out.push_str(&finish_csv(w));
    out
}

/// Indexes features by image id. Input ids are unique per [`parse_features`].
pub fn feature_map(features: Vec<FeatureVector>) -> BTreeMap<String, Vec<f64>> {
    features
        .into_iter()
        .map(|fv| (fv.image_id, fv.values))
        .collect()
}
