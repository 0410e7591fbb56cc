//! EMRE dataset ingestion and validation.
//!
//! Records come from a flat CSV/TSV export of the dataset's database, one row
//! per video. Column names in the export are adapted through a JSON
//! column-mapping config; in-cell lists use a configurable delimiter
//! (default ";"). Structured cells accept both a compact form and JSON:
//!
//! * coordinates — `Cup:0.1 0.0 0.4;Knife:-0.2 0.0 0.7` or `{"Cup":[..]}`
//! * relations   — `in_front(Cup,Knife);near(A,B)` or `[["in_front","Cup","Knife"]]`
//! * scores      — `5;4;3;5;2;1;4;5`
//!
//! Loading is strict: schema problems and invariant violations fail the load,
//! so a `Dataset` in hand is always fully validated.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::names::tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Gesture,
    Language,
    Ensemble,
}

impl Modality {
    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Gesture => "gesture",
            Modality::Language => "language",
            Modality::Ensemble => "ensemble",
        }
    }

    fn parse(s: &str) -> Option<Modality> {
        match s.trim().to_lowercase().as_str() {
            "gesture" => Some(Modality::Gesture),
            "language" => Some(Modality::Language),
            "ensemble" => Some(Modality::Ensemble),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistinctionScope {
    SimilarObjects,
    EntireWorld,
    NotApplicable,
}

impl DistinctionScope {
    pub fn as_str(self) -> &'static str {
        match self {
            DistinctionScope::SimilarObjects => "similar_objects",
            DistinctionScope::EntireWorld => "entire_world",
            DistinctionScope::NotApplicable => "not_applicable",
        }
    }

    fn parse(s: &str) -> Option<DistinctionScope> {
        match s.trim().to_lowercase().as_str() {
            "similar_objects" | "similar" => Some(DistinctionScope::SimilarObjects),
            "entire_world" | "world" => Some(DistinctionScope::EntireWorld),
            "not_applicable" | "n/a" | "na" | "none" => Some(DistinctionScope::NotApplicable),
            _ => None,
        }
    }
}

/// One video's stored parameters and annotator scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmreRecord {
    pub video_id: String,
    pub target_object: String,
    pub modality: Modality,
    /// Distance from the agent to the target, in world units.
    pub agent_distance: f64,
    pub uses_distance_distinction: bool,
    pub distinction_scope: DistinctionScope,
    /// Empty for gesture-only expressions.
    pub utterance: String,
    pub relational_descriptors: Vec<String>,
    pub object_coordinates: BTreeMap<String, [f64; 3]>,
    pub relation_set: Vec<(String, String, String)>,
    /// Eight naturalness judgments, each 1..=5.
    pub scores: Vec<u8>,
}

/// The loaded dataset: records plus the derived object inventory and
/// utterance vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub records: Vec<EmreRecord>,
    pub object_inventory: BTreeSet<String>,
    pub term_vocabulary: BTreeSet<String>,
}

impl Dataset {
    /// Build a dataset from records, deriving inventory and vocabulary by a
    /// full scan. No validation happens here; see [`validate`].
    pub fn from_records(records: Vec<EmreRecord>) -> Dataset {
        let mut inventory = BTreeSet::new();
        let mut vocabulary = BTreeSet::new();
        for rec in &records {
            inventory.insert(rec.target_object.clone());
            inventory.extend(rec.object_coordinates.keys().cloned());
            for (_, a, b) in &rec.relation_set {
                inventory.insert(a.clone());
                inventory.insert(b.clone());
            }
            vocabulary.extend(tokenize(&rec.utterance));
        }
        Dataset {
            records,
            object_inventory: inventory,
            term_vocabulary: vocabulary,
        }
    }

    pub fn record(&self, video_id: &str) -> Option<&EmreRecord> {
        self.records.iter().find(|r| r.video_id == video_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileFormat {
    Csv,
    Tsv,
}

impl FileFormat {
    fn delimiter(self) -> u8 {
        match self {
            FileFormat::Csv => b',',
            FileFormat::Tsv => b'\t',
        }
    }
}

/// Canonical record fields, in export column order.
pub const FIELDS: [&str; 11] = [
    "video_id",
    "target_object",
    "modality",
    "agent_distance",
    "uses_distance_distinction",
    "distinction_scope",
    "utterance",
    "relational_descriptors",
    "object_coordinates",
    "relation_set",
    "scores",
];

/// Maps canonical field names onto the export's column names.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnMapping {
    #[serde(default)]
    pub columns: BTreeMap<String, String>,
    #[serde(default = "default_delimiter")]
    pub list_delimiter: String,
}

fn default_delimiter() -> String {
    ";".to_string()
}

impl Default for ColumnMapping {
    fn default() -> Self {
        ColumnMapping {
            columns: BTreeMap::new(),
            list_delimiter: default_delimiter(),
        }
    }
}

impl ColumnMapping {
    pub fn from_json_file(path: &Path) -> Result<ColumnMapping> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    fn column_for<'a>(&'a self, field: &'a str) -> &'a str {
        self.columns.get(field).map(String::as_str).unwrap_or(field)
    }
}

fn parse_coordinates(cell: &str, delim: &str) -> Result<BTreeMap<String, [f64; 3]>> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(BTreeMap::new());
    }
    if cell.starts_with('{') {
        let map: BTreeMap<String, [f64; 3]> = serde_json::from_str(cell)
            .map_err(|e| Error::Validation(format!("unparseable coordinates: {e}")))?;
        return Ok(map);
    }
    let mut out = BTreeMap::new();
    for entry in cell.split(delim).filter(|s| !s.trim().is_empty()) {
        let (label, coords) = entry.split_once(':').ok_or_else(|| {
            Error::Validation(format!("unparseable coordinate entry \"{entry}\""))
        })?;
        let parts: Vec<&str> = coords.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(Error::Validation(format!(
                "coordinate for {} has {} components, expected 3",
                label.trim(),
                parts.len()
            )));
        }
        let mut v = [0.0; 3];
        for (i, p) in parts.iter().enumerate() {
            v[i] = p.parse::<f64>().map_err(|_| {
                Error::Validation(format!("unparseable coordinate value \"{p}\" for {label}"))
            })?;
        }
        out.insert(label.trim().to_string(), v);
    }
    Ok(out)
}

fn parse_relations(cell: &str, delim: &str) -> Result<Vec<(String, String, String)>> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(Vec::new());
    }
    if cell.starts_with('[') {
        let triples: Vec<(String, String, String)> = serde_json::from_str(cell)
            .map_err(|e| Error::Validation(format!("unparseable relation set: {e}")))?;
        return Ok(triples);
    }
    let mut out = Vec::new();
    for entry in cell.split(delim).filter(|s| !s.trim().is_empty()) {
        let entry = entry.trim();
        let open = entry
            .find('(')
            .ok_or_else(|| Error::Validation(format!("unparseable relation \"{entry}\"")))?;
        let close = entry
            .rfind(')')
            .ok_or_else(|| Error::Validation(format!("unparseable relation \"{entry}\"")))?;
        let rel = entry[..open].trim().to_string();
        let args: Vec<&str> = entry[open + 1..close].split(',').map(str::trim).collect();
        if args.len() != 2 {
            return Err(Error::Validation(format!(
                "relation \"{entry}\" has {} arguments, expected 2",
                args.len()
            )));
        }
        out.push((rel, args[0].to_string(), args[1].to_string()));
    }
    Ok(out)
}

fn parse_bool(cell: &str) -> Option<bool> {
    match cell.trim().to_lowercase().as_str() {
        "true" | "1" | "yes" => Some(true),
        "false" | "0" | "no" => Some(false),
        _ => None,
    }
}

/// Load a dataset from a CSV/TSV export. Row order is preserved; schema and
/// invariant violations fail the load.
pub fn load_dataset(path: &Path, format: FileFormat, mapping: &ColumnMapping) -> Result<Dataset> {
    if !path.exists() {
        return Err(Error::Schema(format!(
            "data file {} does not exist",
            path.display()
        )));
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(format.delimiter())
        .flexible(false)
        .from_path(path)?;

    let headers = reader.headers()?.clone();
    let mut index = BTreeMap::new();
    for field in FIELDS {
        let column = mapping.column_for(field);
        let pos = headers
            .iter()
            .position(|h| h == column)
            .ok_or_else(|| Error::Schema(format!("missing column \"{column}\" (field {field})")))?;
        index.insert(field, pos);
    }

    let delim = mapping.list_delimiter.as_str();
    let mut records = Vec::new();
    for (row_num, row) in reader.records().enumerate() {
        let row = row?;
        let get = |field: &str| row.get(index[field]).unwrap_or("").trim().to_string();
        let row_id = {
            let id = get("video_id");
            if id.is_empty() {
                format!("row {}", row_num + 1)
            } else {
                id
            }
        };
        let with_row = |msg: String| Error::Validation(format!("{row_id}: {msg}"));

        let modality = Modality::parse(&get("modality"))
            .ok_or_else(|| with_row(format!("unknown modality \"{}\"", get("modality"))))?;
        let agent_distance = get("agent_distance").parse::<f64>().map_err(|_| {
            with_row(format!(
                "unparseable distance \"{}\"",
                get("agent_distance")
            ))
        })?;
        let uses_distance_distinction = parse_bool(&get("uses_distance_distinction"))
            .ok_or_else(|| with_row("unparseable distance-distinction flag".to_string()))?;
        let distinction_scope = DistinctionScope::parse(&get("distinction_scope"))
            .ok_or_else(|| with_row(format!("unknown scope \"{}\"", get("distinction_scope"))))?;
        let relational_descriptors: Vec<String> = get("relational_descriptors")
            .split(delim)
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect();
        let object_coordinates =
            parse_coordinates(&get("object_coordinates"), delim).map_err(|e| match e {
                Error::Validation(m) => with_row(m),
                other => other,
            })?;
        let relation_set = parse_relations(&get("relation_set"), delim).map_err(|e| match e {
            Error::Validation(m) => with_row(m),
            other => other,
        })?;
        let mut scores = Vec::new();
        for part in get("scores")
            .split(delim)
            .map(str::trim)
            .filter(|s| !s.is_empty())
        {
            let score = part
                .parse::<u8>()
                .map_err(|_| with_row(format!("unparseable score \"{part}\"")))?;
            if !(1..=5).contains(&score) {
                return Err(with_row(format!("score {score} outside 1..5")));
            }
            scores.push(score);
        }

        records.push(EmreRecord {
            video_id: get("video_id"),
            target_object: get("target_object"),
            modality,
            agent_distance,
            uses_distance_distinction,
            distinction_scope,
            utterance: get("utterance"),
            relational_descriptors,
            object_coordinates,
            relation_set,
            scores,
        });
    }

    let dataset = Dataset::from_records(records);
    let report = validate(&dataset);
    if let Some(v) = report.violations.first() {
        return Err(Error::Validation(format!(
            "{}: {} ({} violation(s) total)",
            v.record_id,
            v.message,
            report.violations.len()
        )));
    }
    Ok(dataset)
}

/// Write a dataset back out as CSV using the canonical column names.
pub fn write_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(FIELDS)?;
    for rec in &ds.records {
        let coords: Vec<String> = rec
            .object_coordinates
            .iter()
            .map(|(l, p)| format!("{l}:{} {} {}", p[0], p[1], p[2]))
            .collect();
        let relations: Vec<String> = rec
            .relation_set
            .iter()
            .map(|(r, a, b)| format!("{r}({a},{b})"))
            .collect();
        let scores: Vec<String> = rec.scores.iter().map(u8::to_string).collect();
        writer.write_record([
            rec.video_id.as_str(),
            rec.target_object.as_str(),
            rec.modality.as_str(),
            &rec.agent_distance.to_string(),
            &rec.uses_distance_distinction.to_string(),
            rec.distinction_scope.as_str(),
            rec.utterance.as_str(),
            &rec.relational_descriptors.join(";"),
            &coords.join(";"),
            &relations.join(";"),
            &scores.join(";"),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub record_id: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check every record and dataset invariant. Violations are reported, not
/// thrown.
pub fn validate(ds: &Dataset) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut push = |id: &str, msg: String| {
        report.violations.push(Violation {
            record_id: id.to_string(),
            message: msg,
        });
    };

    let mut seen_ids = BTreeSet::new();
    for rec in &ds.records {
        let id = rec.video_id.as_str();
        if !seen_ids.insert(id.to_string()) {
            push(id, "duplicate video_id".to_string());
        }
        if rec.modality == Modality::Gesture && !rec.utterance.trim().is_empty() {
            push(
                id,
                "gesture-only record carries a non-empty utterance".to_string(),
            );
        }
        let scope_na = rec.distinction_scope == DistinctionScope::NotApplicable;
        if scope_na == rec.uses_distance_distinction {
            push(
                id,
                format!(
                    "distinction_scope {} inconsistent with uses_distance_distinction={}",
                    rec.distinction_scope.as_str(),
                    rec.uses_distance_distinction
                ),
            );
        }
        if rec.scores.len() != 8 {
            push(id, format!("expected 8 scores, found {}", rec.scores.len()));
        }
        for score in &rec.scores {
            if !(1..=5).contains(score) {
                push(id, format!("score {score} outside 1..5"));
            }
        }
        if !rec.object_coordinates.contains_key(&rec.target_object) {
            push(
                id,
                format!(
                    "target {} missing from object_coordinates",
                    rec.target_object
                ),
            );
        }
        for token in tokenize(&rec.utterance) {
            if !ds.term_vocabulary.contains(&token) {
                push(
                    id,
                    format!("token \"{token}\" missing from term_vocabulary"),
                );
            }
        }
        for label in rec.object_coordinates.keys() {
            if !ds.object_inventory.contains(label) {
                push(id, format!("label {label} missing from object_inventory"));
            }
        }
    }
    report
}
