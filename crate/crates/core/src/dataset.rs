//! Dataset model and ingestion: CSV loading under a configurable column
//! mapping, the four-step cleaning pass, outcome binarization, identity-key
//! grouping, and stratification by application count.
//!
//! Cleaning applies, in order: (i) drop test-model rows, (ii) drop unscored
//! rows, (iii) deduplicate on a configurable key keeping the earliest
//! submission, (iv) remap merged employer ids. Record order is canonical
//! after every pass: ascending `application_id`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write as _;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

/// One screening decision: a model's rating of one application.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplicationRecord {
    pub application_id: String,
    pub applicant_id: String,
    pub position_id: String,
    pub employer_id: String,
    pub model_id: String,
    /// Model score in [0, 1]; `None` when the row was never scored.
    pub score: Option<f64>,
    pub submitted_at: DateTime<Utc>,
    pub race: Option<String>,
    pub gender: Option<String>,
    pub soc_major_group: Option<String>,
    /// Unmapped input columns, keyed by original header name.
    pub extra: BTreeMap<String, String>,
    /// Binarized recommendation; populated by [`binarize`].
    pub outcome: Option<Outcome>,
}

/// Binary screening recommendation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    /// True iff the score strictly exceeded the threshold.
    pub recommended: bool,
}

impl Outcome {
    /// 0/1 encoding used in emitted tables.
    pub fn as_u8(self) -> u8 {
        self.recommended as u8
    }
}

/// Reconciled accounting of one [`clean`] pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanReport {
    pub rows_in: u64,
    pub rows_out: u64,
    pub removed_test_models: u64,
    pub removed_unscored: u64,
    pub deduplicated: u64,
    /// Distinct employer ids rewritten by the merge map.
    pub merged_employer_ids: u64,
}

/// Ordered list of columns whose joint value identifies one applicant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentityKey {
    pub key_columns: Vec<String>,
}

/// Maps the canonical record fields onto input CSV header names.
///
/// The five id columns plus `score` and `submitted_at` are required and
/// ingestion fails if any is absent. The demographic mappings are lenient:
/// when the named column is missing from the header the field is simply
/// left empty. Header columns not consumed by the mapping land in
/// [`ApplicationRecord::extra`] under their original names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemaMapping {
    pub application_id: String,
    pub applicant_id: String,
    pub position_id: String,
    pub employer_id: String,
    pub model_id: String,
    pub score: String,
    pub submitted_at: String,
    pub race: String,
    pub gender: String,
    pub soc_major_group: String,
}

impl Default for SchemaMapping {
    fn default() -> Self {
        SchemaMapping {
            application_id: "application_id".into(),
            applicant_id: "applicant_id".into(),
            position_id: "position_id".into(),
            employer_id: "employer_id".into(),
            model_id: "model_id".into(),
            score: "score".into(),
            submitted_at: "submitted_at".into(),
            race: "race".into(),
            gender: "gender".into(),
            soc_major_group: "soc_major_group".into(),
        }
    }
}

fn parse_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(raw) {
        return Some(t.with_timezone(&Utc));
    }
    // Offset-less ISO-8601 seconds are read as UTC.
    NaiveDateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M:%S")
        .ok()
        .map(|n| n.and_utc())
}

fn none_if_empty(raw: &str) -> Option<String> {
    if raw.is_empty() {
        None
    } else {
        Some(raw.to_string())
    }
}

/// Load a UTF-8 CSV with header into records under `schema`.
///
/// Empty score cells and unparseable score text become missing scores
/// (for [`clean`] to drop); out-of-range numeric scores and unparseable
/// timestamps are hard errors with the offending line. Records return in
/// canonical order (ascending `application_id`).
pub fn load_dataset(path: impl AsRef<Path>, schema: &SchemaMapping) -> Result<Vec<ApplicationRecord>> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::csv(&display, e))?;

    let headers = reader
        .headers()
        .map_err(|e| Error::csv(&display, e))?
        .clone();
    let index_of = |name: &str| headers.iter().position(|h| h == name);
    let require = |name: &String| {
        index_of(name).ok_or_else(|| Error::MissingColumn {
            column: name.clone(),
            path: display.clone(),
        })
    };

    let col_application = require(&schema.application_id)?;
    let col_applicant = require(&schema.applicant_id)?;
    let col_position = require(&schema.position_id)?;
    let col_employer = require(&schema.employer_id)?;
    let col_model = require(&schema.model_id)?;
    let col_score = require(&schema.score)?;
    let col_time = require(&schema.submitted_at)?;
    let col_race = index_of(&schema.race);
    let col_gender = index_of(&schema.gender);
    let col_soc = index_of(&schema.soc_major_group);

    let mapped: BTreeSet<usize> = [
        Some(col_application),
        Some(col_applicant),
        Some(col_position),
        Some(col_employer),
        Some(col_model),
        Some(col_score),
        Some(col_time),
        col_race,
        col_gender,
        col_soc,
    ]
    .into_iter()
    .flatten()
    .collect();
    let extra_cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| !mapped.contains(i))
        .map(|(i, h)| (i, h.to_string()))
        .collect();

    let mut records = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::csv(&display, e))?;
        let data_line = (line + 1) as u64;
        let field = |i: usize| row.get(i).unwrap_or("");

        let raw_score = field(col_score);
        let score = match raw_score.parse::<f64>() {
            Ok(v) if (0.0..=1.0).contains(&v) => Some(v),
            Ok(v) => {
                return Err(Error::Parse {
                    row: data_line,
                    column: schema.score.clone(),
                    value: raw_score.to_string(),
                    reason: format!("score {v} outside [0, 1]"),
                })
            }
            // Unparseable or empty scores are treated as missing.
            Err(_) => None,
        };

        let raw_time = field(col_time);
        let submitted_at = parse_timestamp(raw_time).ok_or_else(|| Error::Parse {
            row: data_line,
            column: schema.submitted_at.clone(),
            value: raw_time.to_string(),
            reason: "expected ISO-8601 seconds timestamp".into(),
        })?;

        let record = ApplicationRecord {
            application_id: field(col_application).to_string(),
            applicant_id: field(col_applicant).to_string(),
            position_id: field(col_position).to_string(),
            employer_id: field(col_employer).to_string(),
            model_id: field(col_model).to_string(),
            score,
            submitted_at,
            race: col_race.and_then(|i| none_if_empty(field(i))),
            gender: col_gender.and_then(|i| none_if_empty(field(i))),
            soc_major_group: col_soc.and_then(|i| none_if_empty(field(i))),
            extra: extra_cols
                .iter()
                .map(|(i, name)| (name.clone(), field(*i).to_string()))
                .collect(),
            outcome: None,
        };
        if record.applicant_id.is_empty() || record.position_id.is_empty() {
            return Err(Error::Parse {
                row: data_line,
                column: "applicant_id/position_id".into(),
                value: String::new(),
                reason: "applicant_id and position_id must be non-empty".into(),
            });
        }
        records.push(record);
    }
    if records.is_empty() {
        return Err(Error::EmptyInput(format!("{display} holds no data rows")));
    }
    records.sort_by(|a, b| a.application_id.cmp(&b.application_id));
    Ok(records)
}

/// Write records as canonical CSV: the ten mapped columns in schema order,
/// then extra columns (union across records) sorted by name. Scores use
/// shortest round-trip formatting so a write/load cycle is lossless;
/// outcomes are not persisted.
pub fn write_dataset(path: impl AsRef<Path>, records: &[ApplicationRecord]) -> Result<()> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let extra_cols: BTreeSet<&str> = records
        .iter()
        .flat_map(|r| r.extra.keys().map(String::as_str))
        .collect();

    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::csv(&display, e))?;
    let mut header = vec![
        "application_id",
        "applicant_id",
        "position_id",
        "employer_id",
        "model_id",
        "score",
        "submitted_at",
        "race",
        "gender",
        "soc_major_group",
    ];
    header.extend(extra_cols.iter().copied());
    writer
        .write_record(&header)
        .map_err(|e| Error::csv(&display, e))?;

    for r in records {
        let mut row: Vec<String> = vec![
            r.application_id.clone(),
            r.applicant_id.clone(),
            r.position_id.clone(),
            r.employer_id.clone(),
            r.model_id.clone(),
            r.score.map(|s| s.to_string()).unwrap_or_default(),
            r.submitted_at.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
            r.race.clone().unwrap_or_default(),
            r.gender.clone().unwrap_or_default(),
            r.soc_major_group.clone().unwrap_or_default(),
        ];
        for &col in &extra_cols {
            row.push(r.extra.get(col).cloned().unwrap_or_default());
        }
        writer.write_record(&row).map_err(|e| Error::csv(&display, e))?;
    }
    writer
        .into_inner()
        .map_err(|e| Error::io(&display, std::io::Error::other(e)))?
        .flush()
        .map_err(|e| Error::io(&display, e))?;
    Ok(())
}

/// Column names resolvable in dedup and identity keys.
const KEYABLE_FIELDS: [&str; 8] = [
    "application_id",
    "applicant_id",
    "position_id",
    "employer_id",
    "model_id",
    "race",
    "gender",
    "soc_major_group",
];

/// Resolve a key column on one record. `Ok(None)` means the column is known
/// but the value is missing on this record (demographics only).
fn resolve_field<'a>(record: &'a ApplicationRecord, column: &str) -> Result<Option<&'a str>> {
    let value = match column {
        "application_id" => Some(record.application_id.as_str()),
        "applicant_id" => Some(record.applicant_id.as_str()),
        "position_id" => Some(record.position_id.as_str()),
        "employer_id" => Some(record.employer_id.as_str()),
        "model_id" => Some(record.model_id.as_str()),
        "race" => record.race.as_deref(),
        "gender" => record.gender.as_deref(),
        "soc_major_group" => record.soc_major_group.as_deref(),
        other => match record.extra.get(other) {
            Some(v) => Some(v.as_str()),
            None if KEYABLE_FIELDS.contains(&other) => unreachable!(),
            None => return Err(Error::UnknownColumn {
                column: other.to_string(),
            }),
        },
    };
    Ok(value)
}

/// Key tuple for deduplication; missing demographic values join as "".
fn key_tuple(record: &ApplicationRecord, columns: &[String]) -> Result<Vec<String>> {
    columns
        .iter()
        .map(|c| Ok(resolve_field(record, c)?.unwrap_or("").to_string()))
        .collect()
}

fn resolve_employer<'a>(
    start: &'a str,
    merge_map: &'a BTreeMap<String, String>,
) -> Result<&'a str> {
    let mut current = start;
    let mut seen = BTreeSet::new();
    while let Some(next) = merge_map.get(current) {
        if !seen.insert(current) {
            return Err(Error::MergeCycle {
                id: start.to_string(),
            });
        }
        current = next;
    }
    Ok(current)
}

/// Four-step cleaning pass; returns surviving records (canonical order)
/// and a reconciled [`CleanReport`].
///
/// Steps in order: remove rows whose `model_id` is in `test_model_ids`;
/// remove rows with missing scores; deduplicate on `dedup_key` keeping the
/// earliest `submitted_at` (ties broken by smaller `application_id`); remap
/// employer ids through `employer_merge_map`, following chains and
/// rejecting cycles. Cleaning is idempotent.
pub fn clean(
    records: Vec<ApplicationRecord>,
    test_model_ids: &BTreeSet<String>,
    dedup_key: &[String],
    employer_merge_map: &BTreeMap<String, String>,
) -> Result<(Vec<ApplicationRecord>, CleanReport)> {
    if dedup_key.is_empty() {
        return Err(Error::InvalidConfig("dedup key must be non-empty".into()));
    }
    let rows_in = records.len() as u64;

    // (i) test models
    let mut kept: Vec<ApplicationRecord> = records
        .into_iter()
        .filter(|r| !test_model_ids.contains(&r.model_id))
        .collect();
    let removed_test_models = rows_in - kept.len() as u64;

    // (ii) unscored
    let before = kept.len() as u64;
    kept.retain(|r| r.score.is_some());
    let removed_unscored = before - kept.len() as u64;

    // (iii) deduplicate, keeping earliest (submitted_at, application_id)
    let mut best: HashMap<Vec<String>, usize> = HashMap::with_capacity(kept.len());
    for (i, r) in kept.iter().enumerate() {
        let key = key_tuple(r, dedup_key)?;
        match best.entry(key) {
            std::collections::hash_map::Entry::Vacant(slot) => {
                slot.insert(i);
            }
            std::collections::hash_map::Entry::Occupied(mut slot) => {
                let cur = &kept[*slot.get()];
                let cand = (r.submitted_at, &r.application_id);
                if cand < (cur.submitted_at, &cur.application_id) {
                    slot.insert(i);
                }
            }
        }
    }
    let winners: BTreeSet<usize> = best.into_values().collect();
    let before = kept.len() as u64;
    let mut survivors = Vec::with_capacity(winners.len());
    for (i, r) in kept.into_iter().enumerate() {
        if winners.contains(&i) {
            survivors.push(r);
        }
    }
    let deduplicated = before - survivors.len() as u64;

    // (iv) employer remap
    let mut remapped: BTreeSet<String> = BTreeSet::new();
    for r in &mut survivors {
        let resolved = resolve_employer(&r.employer_id, employer_merge_map)?;
        if resolved != r.employer_id {
            remapped.insert(r.employer_id.clone());
            r.employer_id = resolved.to_string();
        }
    }

    survivors.sort_by(|a, b| a.application_id.cmp(&b.application_id));
    for pair in survivors.windows(2) {
        if pair[0].application_id == pair[1].application_id {
            return Err(Error::InvalidArgument(format!(
                "duplicate application_id {:?} survives cleaning; widen the dedup key",
                pair[0].application_id
            )));
        }
    }

    let report = CleanReport {
        rows_in,
        rows_out: survivors.len() as u64,
        removed_test_models,
        removed_unscored,
        deduplicated,
        merged_employer_ids: remapped.len() as u64,
    };
    debug_assert_eq!(
        report.rows_out,
        report.rows_in - report.removed_test_models - report.removed_unscored - report.deduplicated
    );
    Ok((survivors, report))
}

/// Binarize scores: recommended iff score **strictly above** `threshold`
/// (a score exactly at the threshold is not recommended). All records must
/// carry a score; run [`clean`] first.
pub fn binarize(records: &mut [ApplicationRecord], threshold: f64) -> Result<()> {
    if !threshold.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "threshold must be finite, got {threshold}"
        )));
    }
    for r in records.iter() {
        if r.score.is_none() {
            return Err(Error::MissingValue(format!(
                "application {:?} has no score; clean before binarizing",
                r.application_id
            )));
        }
    }
    for r in records.iter_mut() {
        r.outcome = Some(Outcome {
            recommended: r.score.unwrap() > threshold,
        });
    }
    Ok(())
}

/// Rewrite `applicant_id` to a canonical digest of the identity-key tuple,
/// so rows agreeing on every key column become one applicant. The original
/// id is preserved in `extra["original_applicant_id"]`. Returns the number
/// of distinct applicants after grouping.
///
/// Grouping is a pure function of key values: input order never affects
/// the resulting ids. A missing demographic value participates as the
/// empty string (missing is a matchable category).
pub fn group_identities(records: &mut [ApplicationRecord], key: &IdentityKey) -> Result<usize> {
    if key.key_columns.is_empty() {
        return Err(Error::InvalidConfig(
            "identity key must name at least one column".into(),
        ));
    }
    // Resolve every row up front so errors list the offending rows.
    let mut tuples = Vec::with_capacity(records.len());
    let mut bad_rows = Vec::new();
    for r in records.iter() {
        match key_tuple(r, &key.key_columns) {
            Ok(t) => tuples.push(t),
            Err(_) => bad_rows.push(r.application_id.clone()),
        }
    }
    if !bad_rows.is_empty() {
        bad_rows.truncate(5);
        return Err(Error::MissingValue(format!(
            "identity key columns missing on rows: {}",
            bad_rows.join(", ")
        )));
    }

    let mut distinct = BTreeSet::new();
    for (r, tuple) in records.iter_mut().zip(tuples) {
        let mut hasher = Sha256::new();
        for part in &tuple {
            hasher.update(part.as_bytes());
            hasher.update([0x1f]); // unit separator keeps tuples unambiguous
        }
        let digest = hasher.finalize();
        let mut id = String::with_capacity(37);
        id.push_str("anon_");
        for byte in &digest[..16] {
            id.push_str(&format!("{byte:02x}"));
        }
        distinct.insert(id.clone());
        let original = std::mem::replace(&mut r.applicant_id, id);
        r.extra
            .insert("original_applicant_id".to_string(), original);
    }
    Ok(distinct.len())
}

/// One applicant's bundle of applications within a k-cohort.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortMember {
    pub applicant_id: String,
    /// Position of each application; repeat applications to one position
    /// appear once per application.
    pub positions: Vec<String>,
    /// Outcome of each application, aligned with `positions`.
    pub outcomes: Vec<bool>,
}

/// Group applicants by how many applications they submitted.
///
/// Every applicant lands in exactly one cohort, keyed by their application
/// count k; cohort sizes sum to the number of distinct applicants.
/// Requires binarized outcomes.
pub fn stratify_by_k(records: &[ApplicationRecord]) -> Result<BTreeMap<usize, Vec<CohortMember>>> {
    let mut by_applicant: BTreeMap<&str, CohortMember> = BTreeMap::new();
    for r in records {
        let outcome = r.outcome.ok_or_else(|| {
            Error::MissingValue(format!(
                "application {:?} has no outcome; binarize before stratifying",
                r.application_id
            ))
        })?;
        let member = by_applicant
            .entry(r.applicant_id.as_str())
            .or_insert_with(|| CohortMember {
                applicant_id: r.applicant_id.clone(),
                positions: Vec::new(),
                outcomes: Vec::new(),
            });
        member.positions.push(r.position_id.clone());
        member.outcomes.push(outcome.recommended);
    }
    let mut cohorts: BTreeMap<usize, Vec<CohortMember>> = BTreeMap::new();
    for (_, member) in by_applicant {
        cohorts
            .entry(member.positions.len())
            .or_default()
            .push(member);
    }
    Ok(cohorts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use proptest::prelude::*;
    use std::io::Write;

    fn ts(seconds: i64) -> DateTime<Utc> {
        Utc.timestamp_opt(1_600_000_000 + seconds, 0).unwrap()
    }

    fn record(app: &str, applicant: &str, position: &str, model: &str, score: f64) -> ApplicationRecord {
        ApplicationRecord {
            application_id: app.to_string(),
            applicant_id: applicant.to_string(),
            position_id: position.to_string(),
            employer_id: "e1".to_string(),
            model_id: model.to_string(),
            score: Some(score),
            submitted_at: ts(0),
            race: None,
            gender: None,
            soc_major_group: None,
            extra: BTreeMap::new(),
            outcome: None,
        }
    }

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    const HEADER: &str =
        "application_id,applicant_id,position_id,employer_id,model_id,score,submitted_at,race,gender,soc_major_group,country";

    #[test]
    fn load_three_rows() {
        let f = write_csv(&format!(
            "{HEADER}\n\
             app3,a1,p1,e1,m1,0.7,2021-01-01T00:00:02Z,white,woman,29-0000,US\n\
             app1,a1,p2,e1,m1,0.2,2021-01-01T00:00:00Z,,,,US\n\
             app2,a2,p1,e2,m2,0.9,2021-01-01T00:00:01Z,black,man,29-0000,CA\n"
        ));
        let records = load_dataset(f.path(), &SchemaMapping::default()).unwrap();
        assert_eq!(records.len(), 3);
        // Canonical order by application_id.
        assert_eq!(records[0].application_id, "app1");
        assert_eq!(records[0].race, None);
        assert_eq!(records[2].application_id, "app3");
        assert_eq!(records[2].score, Some(0.7));
        assert_eq!(records[2].race.as_deref(), Some("white"));
        assert_eq!(records[2].extra["country"], "US");
        assert_eq!(records[1].submitted_at, Utc.with_ymd_and_hms(2021, 1, 1, 0, 0, 1).unwrap());
    }

    #[test]
    fn load_treats_blank_and_junk_scores_as_missing() {
        let f = write_csv(&format!(
            "{HEADER}\n\
             app1,a1,p1,e1,m1,,2021-01-01T00:00:00Z,,,,\n\
             app2,a2,p1,e1,m1,n/a,2021-01-01T00:00:00Z,,,,\n"
        ));
        let records = load_dataset(f.path(), &SchemaMapping::default()).unwrap();
        assert!(records.iter().all(|r| r.score.is_none()));
    }

    #[test]
    fn load_rejects_out_of_range_score() {
        let f = write_csv(&format!(
            "{HEADER}\napp1,a1,p1,e1,m1,1.5,2021-01-01T00:00:00Z,,,,\n"
        ));
        let err = load_dataset(f.path(), &SchemaMapping::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 1, .. }), "{err}");
    }

    #[test]
    fn load_rejects_bad_timestamp_with_line() {
        let f = write_csv(&format!(
            "{HEADER}\n\
             app1,a1,p1,e1,m1,0.5,2021-01-01T00:00:00Z,,,,\n\
             app2,a2,p1,e1,m1,0.5,yesterday,,,,\n"
        ));
        let err = load_dataset(f.path(), &SchemaMapping::default()).unwrap_err();
        match err {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "submitted_at");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn load_accepts_offsetless_timestamps() {
        let f = write_csv(&format!(
            "{HEADER}\napp1,a1,p1,e1,m1,0.5,2021-06-01T12:30:00,,,,\n"
        ));
        let records = load_dataset(f.path(), &SchemaMapping::default()).unwrap();
        assert_eq!(
            records[0].submitted_at,
            Utc.with_ymd_and_hms(2021, 6, 1, 12, 30, 0).unwrap()
        );
    }

    #[test]
    fn load_rejects_missing_required_column_and_empty_file() {
        let f = write_csv("application_id,applicant_id\n");
        let err = load_dataset(f.path(), &SchemaMapping::default()).unwrap_err();
        assert!(matches!(err, Error::MissingColumn { .. }), "{err}");

        let f = write_csv(&format!("{HEADER}\n"));
        let err = load_dataset(f.path(), &SchemaMapping::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyInput(_)), "{err}");
    }

    #[test]
    fn load_is_lenient_about_absent_demographic_columns() {
        let f = write_csv(
            "application_id,applicant_id,position_id,employer_id,model_id,score,submitted_at\n\
             app1,a1,p1,e1,m1,0.6,2021-01-01T00:00:00Z\n",
        );
        let records = load_dataset(f.path(), &SchemaMapping::default()).unwrap();
        assert_eq!(records[0].race, None);
        assert_eq!(records[0].soc_major_group, None);
    }

    #[test]
    fn clean_four_steps_reconcile() {
        let mut dup_late = record("app4", "a1", "p1", "m1", 0.6);
        dup_late.submitted_at = ts(100);
        let mut unscored = record("app5", "a3", "p1", "m1", 0.0);
        unscored.score = None;
        let records = vec![
            record("app1", "a1", "p1", "m1", 0.6), // survives; dedup winner
            record("app2", "a2", "p1", "test", 0.5), // test model
            record("app3", "a2", "p2", "m1", 0.8), // survives
            dup_late,                              // duplicate of app1, later
            unscored,                              // unscored
        ];
        let tests: BTreeSet<String> = ["test".to_string()].into();
        let dedup: Vec<String> = ["applicant_id", "model_id", "position_id"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let merge: BTreeMap<String, String> = [("e1".to_string(), "e0".to_string())].into();
        let (out, report) = clean(records, &tests, &dedup, &merge).unwrap();

        assert_eq!(report.rows_in, 5);
        assert_eq!(report.removed_test_models, 1);
        assert_eq!(report.removed_unscored, 1);
        assert_eq!(report.deduplicated, 1);
        assert_eq!(report.rows_out, 2);
        assert_eq!(report.merged_employer_ids, 1);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].application_id, "app1"); // earliest kept
        assert!(out.iter().all(|r| r.employer_id == "e0"));
    }

    #[test]
    fn clean_dedup_tie_keeps_smaller_application_id() {
        let records = vec![
            record("app2", "a1", "p1", "m1", 0.6),
            record("app1", "a1", "p1", "m1", 0.7),
        ];
        let dedup: Vec<String> = ["applicant_id", "model_id", "position_id"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let (out, report) = clean(records, &BTreeSet::new(), &dedup, &BTreeMap::new()).unwrap();
        assert_eq!(report.deduplicated, 1);
        assert_eq!(out[0].application_id, "app1");
    }

    #[test]
    fn clean_follows_merge_chains_and_rejects_cycles() {
        let records = vec![record("app1", "a1", "p1", "m1", 0.5)];
        let dedup = vec!["applicant_id".to_string()];
        let chain: BTreeMap<String, String> = [
            ("e1".to_string(), "e2".to_string()),
            ("e2".to_string(), "e3".to_string()),
        ]
        .into();
        let (out, _) = clean(records.clone(), &BTreeSet::new(), &dedup, &chain).unwrap();
        assert_eq!(out[0].employer_id, "e3");

        let cycle: BTreeMap<String, String> = [
            ("e1".to_string(), "e2".to_string()),
            ("e2".to_string(), "e1".to_string()),
        ]
        .into();
        let err = clean(records, &BTreeSet::new(), &dedup, &cycle).unwrap_err();
        assert!(matches!(err, Error::MergeCycle { .. }), "{err}");
    }

    #[test]
    fn clean_is_idempotent() {
        let mut dup = record("app2", "a1", "p1", "m1", 0.6);
        dup.submitted_at = ts(5);
        let records = vec![record("app1", "a1", "p1", "m1", 0.6), dup];
        let tests: BTreeSet<String> = BTreeSet::new();
        let dedup: Vec<String> = ["applicant_id", "model_id", "position_id"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let merge: BTreeMap<String, String> = [("e1".to_string(), "e9".to_string())].into();
        let (once, _) = clean(records, &tests, &dedup, &merge).unwrap();
        let (twice, report) = clean(once.clone(), &tests, &dedup, &merge).unwrap();
        assert_eq!(once, twice);
        assert_eq!(report.rows_in, report.rows_out);
        assert_eq!(report.deduplicated, 0);
        assert_eq!(report.merged_employer_ids, 0);
    }

    #[test]
    fn binarize_threshold_rules() {
        let mut records = vec![
            record("app1", "a1", "p1", "m1", 0.49),
            record("app2", "a2", "p1", "m1", 0.51),
            record("app3", "a3", "p1", "m1", 0.5),
        ];
        binarize(&mut records, 0.5).unwrap();
        let flags: Vec<bool> = records
            .iter()
            .map(|r| r.outcome.unwrap().recommended)
            .collect();
        // Exactly at threshold is not recommended.
        assert_eq!(flags, vec![false, true, false]);
    }

    #[test]
    fn binarize_all_zero_scores() {
        let mut records: Vec<_> = (0..4)
            .map(|i| record(&format!("app{i}"), "a1", "p1", "m1", 0.0))
            .collect();
        binarize(&mut records, 0.5).unwrap();
        assert!(records.iter().all(|r| !r.outcome.unwrap().recommended));
    }

    #[test]
    fn binarize_requires_scores() {
        let mut r = record("app1", "a1", "p1", "m1", 0.5);
        r.score = None;
        assert!(binarize(&mut [r], 0.5).is_err());
    }

    #[test]
    fn group_identities_merges_matching_key_tuples() {
        let mut a = record("app1", "a1", "p1", "m1", 0.5);
        let mut b = record("app2", "a2", "p2", "m1", 0.7);
        let mut c = record("app3", "a3", "p3", "m1", 0.9);
        for (r, first, addr) in [(&mut a, "pat", "12 oak st"), (&mut b, "pat", "99 elm ave"), (&mut c, "sam", "12 oak st")] {
            r.extra.insert("first_name".into(), first.into());
            r.extra.insert("address".into(), addr.into());
        }
        let mut records = [a, b, c];
        let key = IdentityKey {
            key_columns: vec!["first_name".to_string()],
        };
        let n = group_identities(&mut records, &key).unwrap();
        assert_eq!(n, 2);
        // Same key, different address: one applicant.
        assert_eq!(records[0].applicant_id, records[1].applicant_id);
        assert_ne!(records[0].applicant_id, records[2].applicant_id);
        assert_eq!(records[0].extra["original_applicant_id"], "a1");
        assert_eq!(records[1].extra["original_applicant_id"], "a2");
    }

    #[test]
    fn group_identities_differing_column_separates() {
        let mut a = record("app1", "a1", "p1", "m1", 0.5);
        a.race = Some("white".into());
        let mut b = record("app2", "a2", "p2", "m1", 0.7);
        b.race = Some("black".into());
        let mut records = [a, b];
        let key = IdentityKey {
            key_columns: vec!["race".to_string()],
        };
        group_identities(&mut records, &key).unwrap();
        assert_ne!(records[0].applicant_id, records[1].applicant_id);
    }

    #[test]
    fn group_identities_is_order_invariant() {
        let build = || {
            let rs: Vec<ApplicationRecord> = (0..6)
                .map(|i| {
                    let mut r = record(&format!("app{i}"), &format!("a{i}"), "p1", "m1", 0.5);
                    r.extra.insert("fn".into(), format!("name{}", i % 2));
                    r
                })
                .collect();
            rs
        };
        let key = IdentityKey {
            key_columns: vec!["fn".to_string()],
        };
        let mut fwd = build();
        group_identities(&mut fwd, &key).unwrap();
        let mut rev = build();
        rev.reverse();
        group_identities(&mut rev, &key).unwrap();
        for r in &fwd {
            let twin = rev
                .iter()
                .find(|x| x.application_id == r.application_id)
                .unwrap();
            assert_eq!(r.applicant_id, twin.applicant_id);
        }
    }

    #[test]
    fn group_identities_reports_missing_columns_with_rows() {
        let mut records = [record("app1", "a1", "p1", "m1", 0.5)];
        let key = IdentityKey {
            key_columns: vec!["no_such_column".to_string()],
        };
        let err = group_identities(&mut records, &key).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("app1"), "{msg}");
        assert!(
            group_identities(&mut records, &IdentityKey { key_columns: vec![] }).is_err()
        );
    }

    #[test]
    fn stratify_counts_applications_per_applicant() {
        let mut records = vec![
            record("app1", "a1", "p1", "m1", 0.6),
            record("app2", "a1", "p2", "m1", 0.4),
            record("app3", "a1", "p2", "m1", 0.7), // repeat position: still counted
            record("app4", "a1", "p3", "m1", 0.2),
            record("app5", "a2", "p1", "m1", 0.9),
        ];
        binarize(&mut records, 0.5).unwrap();
        let cohorts = stratify_by_k(&records).unwrap();
        assert_eq!(cohorts.len(), 2);
        assert_eq!(cohorts[&4].len(), 1);
        assert_eq!(cohorts[&1].len(), 1);
        let member = &cohorts[&4][0];
        assert_eq!(member.positions.len(), 4);
        assert_eq!(member.outcomes, vec![true, false, true, false]);
        let total: usize = cohorts.values().map(Vec::len).sum();
        assert_eq!(total, 2);
    }

    #[test]
    fn stratify_requires_outcomes() {
        let records = [record("app1", "a1", "p1", "m1", 0.6)];
        assert!(stratify_by_k(&records).is_err());
    }

    #[test]
    fn write_then_load_round_trips() {
        let mut a = record("app1", "a1", "p1", "m1", 0.123_456_789_012_345_68);
        a.race = Some("white".into());
        a.extra.insert("country".into(), "US".into());
        let mut b = record("app2", "a2", "p2", "m2", 0.5);
        b.extra.insert("country".into(), "CA".into());
        let records = vec![a, b];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        write_dataset(&path, &records).unwrap();
        let loaded = load_dataset(&path, &SchemaMapping::default()).unwrap();
        assert_eq!(records, loaded);
    }

    proptest! {
        #[test]
        fn binarize_monotone_in_threshold(
            scores in proptest::collection::vec(0.0f64..=1.0, 1..40),
            lo in 0.0f64..=1.0,
            hi in 0.0f64..=1.0
        ) {
            let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
            let mut low: Vec<ApplicationRecord> = scores
                .iter()
                .enumerate()
                .map(|(i, &s)| record(&format!("app{i}"), "a1", "p1", "m1", s))
                .collect();
            let mut high = low.clone();
            binarize(&mut low, lo).unwrap();
            binarize(&mut high, hi).unwrap();
            let rate = |rs: &[ApplicationRecord]| {
                rs.iter().filter(|r| r.outcome.unwrap().recommended).count()
            };
            // Raising the threshold never increases the selection rate.
            prop_assert!(rate(&high) <= rate(&low));
        }

        #[test]
        fn clean_idempotent_on_random_corpora(
            n in 1usize..30,
            seed in 0u64..500
        ) {
            let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
            let mut next = || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 33) as usize
            };
            let records: Vec<ApplicationRecord> = (0..n)
                .map(|i| {
                    let mut r = record(
                        &format!("app{i:03}"),
                        &format!("a{}", next() % 5),
                        &format!("p{}", next() % 4),
                        &format!("m{}", next() % 3),
                        (next() % 100) as f64 / 100.0,
                    );
                    r.submitted_at = ts((next() % 50) as i64);
                    r
                })
                .collect();
            let dedup: Vec<String> = ["applicant_id", "model_id", "position_id"]
                .iter().map(|s| s.to_string()).collect();
            let merge: BTreeMap<String, String> = [("e1".to_string(), "e0".to_string())].into();
            let (once, _) = clean(records, &BTreeSet::new(), &dedup, &merge).unwrap();
            let (twice, rep) = clean(once.clone(), &BTreeSet::new(), &dedup, &merge).unwrap();
            prop_assert_eq!(once, twice);
            prop_assert_eq!(rep.deduplicated, 0);
        }
    }
}
