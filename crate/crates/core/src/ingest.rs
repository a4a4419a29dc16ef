//! Flow-record CSV ingestion: parsing, cleaning, label encoding, stratified
//! splitting, and z-score standardization.
//!
//! The expected input is an RFC-4180-style CSV with a header row and a label
//! column named `Label` (after whitespace trimming). Cells `Infinity`,
//! `-Infinity` and `NaN` are recognized case-sensitively as non-finite
//! numerics; anything else that fails numeric parsing is treated as text and
//! resolved during cleaning.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use chrono::NaiveDateTime;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::rng::{stream_rng, DOMAIN_SPLIT};

/// Default label column name (matched after trimming).
pub const LABEL_COLUMN: &str = "Label";

/// Identifier-like columns that can be excluded from the candidate feature
/// set via the pipeline flag. They encode per-session identity rather than
/// traffic shape.
pub const IDENTIFIER_FEATURES: &[&str] = &["Flow ID", "Source IP", "Destination IP", "Timestamp"];

const TIMESTAMP_FEATURE: &str = "Timestamp";

const TIMESTAMP_FORMATS: &[&str] = &[
    "%Y-%m-%d %H:%M:%S%.f",
    "%Y-%m-%d %H:%M:%S",
    "%d/%m/%Y %H:%M:%S",
    "%d/%m/%Y %H:%M",
    "%m/%d/%Y %H:%M:%S",
    "%m/%d/%Y %H:%M",
];

// ---------------------------------------------------------------------------
// Schema and label dictionary
// ---------------------------------------------------------------------------

/// Column layout of a flow CSV. Names are whitespace-trimmed and unique
/// (duplicates get a `.1`, `.2`, ... suffix in first-seen order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub names: Vec<String>,
    pub label_column: String,
    /// Per-column flag: `true` when every cell parsed as a number
    /// (the label column is always `false`).
    pub numeric_mask: Vec<bool>,
}

/// Ordered mapping from canonical label names to contiguous indices, with an
/// alias table for dataset spellings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelDictionary {
    names: Vec<String>,
    aliases: BTreeMap<String, String>,
}

impl LabelDictionary {
    pub fn new(names: Vec<String>) -> Result<Self> {
        Self::with_aliases(names, BTreeMap::new())
    }

    pub fn with_aliases(names: Vec<String>, aliases: BTreeMap<String, String>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::Argument("label dictionary cannot be empty".into()));
        }
        let distinct: BTreeSet<&String> = names.iter().collect();
        if distinct.len() != names.len() {
            return Err(Error::Argument(
                "label dictionary has duplicate canonical names".into(),
            ));
        }
        Ok(LabelDictionary { names, aliases })
    }

    /// The three-label dictionary used for the CICDDoS2019 LDAP/MSSQL days,
    /// with the raw spellings found in the public files as aliases.
    pub fn cic_ddos2019() -> Self {
        LabelDictionary {
            names: vec![
                "BENIGN".to_string(),
                "DDoS_LDAP".to_string(),
                "DDoS_MSSQL".to_string(),
            ],
            aliases: cic_label_aliases(),
        }
    }

    /// Build a dictionary from observed labels: canonical names are the
    /// sorted distinct alias-resolved spellings.
    pub fn infer(raw_labels: &[String], aliases: BTreeMap<String, String>) -> Result<Self> {
        let mut canon: BTreeSet<String> = BTreeSet::new();
        for raw in raw_labels {
            let name = aliases.get(raw.as_str()).cloned().unwrap_or_else(|| raw.clone());
            canon.insert(name);
        }
        Self::with_aliases(canon.into_iter().collect(), aliases)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name_of(&self, index: usize) -> &str {
        &self.names[index]
    }

    /// Alias-resolved lookup.
    pub fn resolve(&self, raw: &str) -> Option<usize> {
        let canonical = self.aliases.get(raw).map(String::as_str).unwrap_or(raw);
        self.names.iter().position(|n| n == canonical)
    }
}

/// Raw spellings observed in the public CICDDoS2019 files mapped to the
/// canonical label names.
pub fn cic_label_aliases() -> BTreeMap<String, String> {
    [
        ("LDAP", "DDoS_LDAP"),
        ("DrDoS_LDAP", "DDoS_LDAP"),
        ("MSSQL", "DDoS_MSSQL"),
        ("DrDoS_MSSQL", "DDoS_MSSQL"),
    ]
    .iter()
    .map(|(a, c)| (a.to_string(), c.to_string()))
    .collect()
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

/// How to interpret the header row.
#[derive(Debug, Clone, Copy)]
pub enum SchemaMode<'a> {
    /// Header defines the columns; a `Label` column is required.
    Infer,
    /// Header defines the columns; a label column is optional (prediction
    /// inputs). When present under the default name it is still captured.
    FeaturesOnly,
    /// Header must match the given schema's names exactly.
    Explicit(&'a ColumnSchema),
}

/// Parse output: numeric cells are materialized, text cells are kept in a
/// side table for the cleaning stage, labels stay as raw strings.
#[derive(Debug, Clone)]
pub struct RawDataset {
    pub schema: ColumnSchema,
    pub feature_names: Vec<String>,
    /// Row-major `n_rows x feature_names.len()`; text cells hold NaN
    /// placeholders until cleaning.
    pub values: Vec<f64>,
    pub n_rows: usize,
    /// feature column index -> (row, raw text) for cells that are not numeric.
    pub text_cells: BTreeMap<usize, Vec<(usize, String)>>,
    /// Per feature column: number of empty cells (parsed as missing/NaN).
    pub empty_counts: Vec<usize>,
    /// Raw label strings; empty when the input has no label column.
    pub raw_labels: Vec<String>,
    pub has_labels: bool,
}

enum Cell {
    Num(f64),
    Text,
}

fn parse_cell(s: &str) -> Cell {
    if s.is_empty() {
        return Cell::Num(f64::NAN);
    }
    match s {
        "Infinity" => return Cell::Num(f64::INFINITY),
        "-Infinity" => return Cell::Num(f64::NEG_INFINITY),
        "NaN" => return Cell::Num(f64::NAN),
        _ => {}
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Cell::Num(v),
        // Overflowing decimal literals like 1e999 legitimately parse to
        // infinity; alphabetic spellings ("inf", "nan") are text because the
        // special tokens above are matched case-sensitively.
        Ok(v) if is_plain_number(s) => Cell::Num(v),
        _ => Cell::Text,
    }
}

fn is_plain_number(s: &str) -> bool {
    s.chars()
        .all(|c| c.is_ascii_digit() || matches!(c, '+' | '-' | '.' | 'e' | 'E'))
}

fn dedup_names(raw: &csv::StringRecord) -> Vec<String> {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut names = Vec::with_capacity(raw.len());
    for field in raw.iter() {
        let base = field.trim().to_string();
        let count = seen.entry(base.clone()).or_insert(0);
        if *count == 0 {
            names.push(base.clone());
        } else {
            names.push(format!("{base}.{count}"));
        }
        *count += 1;
    }
    names
}

/// Parse a flow CSV. The header row is required; data rows must have exactly
/// as many cells as the header.
pub fn parse_flow_csv<R: Read>(reader: R, mode: SchemaMode<'_>) -> Result<RawDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut records = rdr.records();
    let header = match records.next() {
        None => return Err(Error::Schema("missing header row".into())),
        Some(rec) => rec.map_err(csv_error)?,
    };
    let names = dedup_names(&header);
    if names.iter().all(|n| n.is_empty()) {
        return Err(Error::Schema("missing header row".into()));
    }

    let label_column = match mode {
        SchemaMode::Infer | SchemaMode::FeaturesOnly => LABEL_COLUMN.to_string(),
        SchemaMode::Explicit(schema) => schema.label_column.clone(),
    };
    if let SchemaMode::Explicit(schema) = mode {
        if names != schema.names {
            return Err(Error::Schema(format!(
                "header does not match expected schema (expected {} columns starting with {:?}, found {} starting with {:?})",
                schema.names.len(),
                schema.names.first(),
                names.len(),
                names.first()
            )));
        }
    }
    let label_idx = names.iter().position(|n| n == &label_column);
    match mode {
        SchemaMode::Infer | SchemaMode::Explicit(_) => {
            if label_idx.is_none() {
                return Err(Error::Schema(format!(
                    "label column '{label_column}' not found in header"
                )));
            }
        }
        SchemaMode::FeaturesOnly => {}
    }

    let n_cols = names.len();
    let mut rows: Vec<csv::StringRecord> = Vec::new();
    for rec in records {
        let rec = rec.map_err(csv_error)?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue; // blank line
        }
        if rec.len() != n_cols {
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            return Err(Error::Row {
                line,
                message: format!("expected {} cells, found {}", n_cols, rec.len()),
            });
        }
        rows.push(rec);
    }

    let n_features = n_cols - usize::from(label_idx.is_some());
    struct RowParse {
        values: Vec<f64>,
        texts: Vec<(usize, String)>,
        empties: Vec<usize>,
        label: Option<String>,
    }
    let parsed: Vec<RowParse> = exec::map_items(&rows, |rec| {
        let mut values = Vec::with_capacity(n_features);
        let mut texts = Vec::new();
        let mut empties = Vec::new();
        let mut label = None;
        for (col, cell) in rec.iter().enumerate() {
            if Some(col) == label_idx {
                label = Some(cell.to_string());
                continue;
            }
            let feat = col - usize::from(label_idx.is_some_and(|l| col > l));
            match parse_cell(cell) {
                Cell::Num(v) => {
                    if cell.is_empty() {
                        empties.push(feat);
                    }
                    values.push(v);
                }
                Cell::Text => {
                    texts.push((feat, cell.to_string()));
                    values.push(f64::NAN);
                }
            }
        }
        RowParse {
            values,
            texts,
            empties,
            label,
        }
    });

    let n_rows = parsed.len();
    let mut values = Vec::with_capacity(n_rows * n_features);
    let mut text_cells: BTreeMap<usize, Vec<(usize, String)>> = BTreeMap::new();
    let mut empty_counts = vec![0usize; n_features];
    let mut raw_labels = Vec::with_capacity(n_rows);
    for (row, parse) in parsed.into_iter().enumerate() {
        values.extend_from_slice(&parse.values);
        for (feat, text) in parse.texts {
            text_cells.entry(feat).or_default().push((row, text));
        }
        for feat in parse.empties {
            empty_counts[feat] += 1;
        }
        if let Some(l) = parse.label {
            raw_labels.push(l);
        }
    }

    let feature_names: Vec<String> = names
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != label_idx)
        .map(|(_, n)| n.clone())
        .collect();
    let numeric_mask: Vec<bool> = names
        .iter()
        .enumerate()
        .map(|(i, _)| {
            if Some(i) == label_idx {
                return false;
            }
            let feat = i - usize::from(label_idx.is_some_and(|l| i > l));
            !text_cells.contains_key(&feat)
        })
        .collect();

    Ok(RawDataset {
        schema: ColumnSchema {
            names,
            label_column,
            numeric_mask,
        },
        feature_names,
        values,
        n_rows,
        text_cells,
        empty_counts,
        raw_labels,
        has_labels: label_idx.is_some(),
    })
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.kind() {
        csv::ErrorKind::Io(_) => Error::Io {
            path: "<csv stream>".into(),
            source: std::io::Error::new(std::io::ErrorKind::Other, e),
        },
        _ => Error::Row {
            line,
            message: e.to_string(),
        },
    }
}

// ---------------------------------------------------------------------------
// Cleaning
// ---------------------------------------------------------------------------

/// What to do with NaN/infinite numeric cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NonFinitePolicy {
    /// Replace each non-finite cell with 0 and log the count.
    #[default]
    ReplaceZero,
    /// Drop every row containing a non-finite cell.
    DropRows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleaningPolicy {
    pub non_finite: NonFinitePolicy,
    /// Try to decode a `Timestamp` column as seconds since epoch before
    /// falling back to hashing.
    pub parse_timestamps: bool,
}

impl Default for CleaningPolicy {
    fn default() -> Self {
        CleaningPolicy {
            non_finite: NonFinitePolicy::ReplaceZero,
            parse_timestamps: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleaningLogEntry {
    pub column: String,
    pub replaced: usize,
    pub rule: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CleaningLog {
    pub entries: Vec<CleaningLogEntry>,
}

impl CleaningLog {
    fn push(&mut self, column: &str, replaced: usize, rule: &str) {
        if replaced > 0 {
            self.entries.push(CleaningLogEntry {
                column: column.to_string(),
                replaced,
                rule: rule.to_string(),
            });
        }
    }

    /// One JSON object per line: `{"column":...,"replaced":...,"rule":...}`.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for entry in &self.entries {
            let value = serde_json::to_value(entry)
                .map_err(|e| Error::Format(format!("cleaning log: {e}")))?;
            writeln!(w, "{value}").map_err(|e| Error::io("<cleaning log>", e))?;
        }
        Ok(())
    }
}

/// Fully numeric, finite feature matrix with labels still as raw text.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanDataset {
    pub feature_names: Vec<String>,
    pub values: Vec<f64>,
    pub n_rows: usize,
    pub raw_labels: Vec<String>,
}

/// 64-bit FNV-1a over the trimmed text, folded modulo 2^32 and cast to a
/// real. Stable across runs and machines.
pub fn hash_encode(text: &str) -> f64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for byte in text.trim().as_bytes() {
        h ^= u64::from(*byte);
        h = h.wrapping_mul(PRIME);
    }
    (h & 0xffff_ffff) as f64
}

fn parse_timestamp_seconds(s: &str) -> Option<f64> {
    for fmt in TIMESTAMP_FORMATS {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            let utc = dt.and_utc();
            return Some(utc.timestamp() as f64 + f64::from(utc.timestamp_subsec_micros()) / 1e6);
        }
    }
    None
}

/// Resolve text cells (hash encoding, timestamp decoding) and apply the
/// non-finite policy. The output matrix contains no NaN or infinite value.
pub fn clean_dataset(raw: &RawDataset, policy: &CleaningPolicy) -> Result<(CleanDataset, CleaningLog)> {
    let n_features = raw.feature_names.len();
    let mut log = CleaningLog::default();

    if raw.n_rows > 0 {
        for (feat, count) in raw.empty_counts.iter().enumerate() {
            if *count == raw.n_rows && !raw.text_cells.contains_key(&feat) {
                return Err(Error::Column {
                    column: raw.feature_names[feat].clone(),
                    message: "entirely empty: not parseable as numbers or encodable as text".into(),
                });
            }
        }
    }

    let mut values = raw.values.clone();

    for (feat, cells) in &raw.text_cells {
        let name = &raw.feature_names[*feat];
        let is_timestamp = policy.parse_timestamps && name == TIMESTAMP_FEATURE;
        let mut hashed = 0usize;
        let mut decoded = 0usize;
        for (row, text) in cells {
            let encoded = if is_timestamp {
                match parse_timestamp_seconds(text) {
                    Some(secs) => {
                        decoded += 1;
                        secs
                    }
                    None => {
                        hashed += 1;
                        hash_encode(text)
                    }
                }
            } else {
                hashed += 1;
                hash_encode(text)
            };
            values[row * n_features + feat] = encoded;
        }
        log.push(name, decoded, "timestamp_seconds");
        log.push(name, hashed, "hash_encode");
    }

    let mut raw_labels = raw.raw_labels.clone();
    let mut n_rows = raw.n_rows;
    match policy.non_finite {
        NonFinitePolicy::ReplaceZero => {
            let mut replaced = vec![0usize; n_features];
            for row in 0..n_rows {
                for feat in 0..n_features {
                    let v = &mut values[row * n_features + feat];
                    if !v.is_finite() {
                        *v = 0.0;
                        replaced[feat] += 1;
                    }
                }
            }
            for (feat, count) in replaced.iter().enumerate() {
                log.push(&raw.feature_names[feat], *count, "replace_zero");
            }
        }
        NonFinitePolicy::DropRows => {
            let mut dropped_cells = vec![0usize; n_features];
            let mut keep = Vec::with_capacity(n_rows);
            for row in 0..n_rows {
                let slice = &values[row * n_features..(row + 1) * n_features];
                let bad = slice.iter().any(|v| !v.is_finite());
                if bad {
                    for (feat, v) in slice.iter().enumerate() {
                        if !v.is_finite() {
                            dropped_cells[feat] += 1;
                        }
                    }
                } else {
                    keep.push(row);
                }
            }
            if keep.len() != n_rows {
                let mut kept_values = Vec::with_capacity(keep.len() * n_features);
                let mut kept_labels = Vec::with_capacity(keep.len());
                for &row in &keep {
                    kept_values.extend_from_slice(&values[row * n_features..(row + 1) * n_features]);
                    if raw.has_labels {
                        kept_labels.push(raw_labels[row].clone());
                    }
                }
                values = kept_values;
                if raw.has_labels {
                    raw_labels = kept_labels;
                }
                n_rows = keep.len();
            }
            for (feat, count) in dropped_cells.iter().enumerate() {
                log.push(&raw.feature_names[feat], *count, "drop_row");
            }
        }
    }

    Ok((
        CleanDataset {
            feature_names: raw.feature_names.clone(),
            values,
            n_rows,
            raw_labels,
        },
        log,
    ))
}

// ---------------------------------------------------------------------------
// Labeled dataset
// ---------------------------------------------------------------------------

/// Encode raw label texts against a dictionary; aliases are resolved first.
pub fn encode_labels(raw_labels: &[String], dict: &LabelDictionary) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(raw_labels.len());
    for (row, raw) in raw_labels.iter().enumerate() {
        match dict.resolve(raw) {
            Some(idx) => out.push(idx),
            None => {
                return Err(Error::Schema(format!(
                    "unknown label '{raw}' at data row {row}"
                )))
            }
        }
    }
    Ok(out)
}

/// Dense numeric dataset: finite features, encoded labels, named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Vec<f64>,
    n_features: usize,
    labels: Vec<usize>,
    pub feature_names: Vec<String>,
    pub label_dict: LabelDictionary,
    pub provenance: String,
}

impl LabeledDataset {
    pub fn from_parts(
        feature_names: Vec<String>,
        features: Vec<f64>,
        labels: Vec<usize>,
        label_dict: LabelDictionary,
        provenance: String,
    ) -> Result<Self> {
        let n_features = feature_names.len();
        if n_features == 0 && !features.is_empty() {
            return Err(Error::Argument("features present but no feature names".into()));
        }
        if n_features > 0 && features.len() % n_features != 0 {
            return Err(Error::Argument(format!(
                "feature matrix length {} is not a multiple of {} columns",
                features.len(),
                n_features
            )));
        }
        let n_rows = if n_features == 0 { labels.len() } else { features.len() / n_features };
        if labels.len() != n_rows {
            return Err(Error::Argument(format!(
                "label count {} does not match row count {}",
                labels.len(),
                n_rows
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= label_dict.len()) {
            return Err(Error::Argument(format!(
                "label index {bad} out of range for dictionary of {}",
                label_dict.len()
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument(
                "feature matrix contains NaN or infinite values".into(),
            ));
        }
        Ok(LabeledDataset {
            features,
            n_features,
            labels,
            feature_names,
            label_dict,
            provenance,
        })
    }

    pub fn from_clean(
        clean: &CleanDataset,
        dict: LabelDictionary,
        provenance: String,
    ) -> Result<Self> {
        let labels = encode_labels(&clean.raw_labels, &dict)?;
        Self::from_parts(
            clean.feature_names.clone(),
            clean.values.clone(),
            labels,
            dict,
            provenance,
        )
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.features[row * self.n_features + feature]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Flat row-major view of the feature matrix.
    pub fn features_flat(&self) -> &[f64] {
        &self.features
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.label_dict.len()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// New dataset containing `rows` in the given order.
    pub fn subset(&self, rows: &[usize]) -> Self {
        let mut features = Vec::with_capacity(rows.len() * self.n_features);
        let mut labels = Vec::with_capacity(rows.len());
        for &r in rows {
            features.extend_from_slice(self.row(r));
            labels.push(self.labels[r]);
        }
        LabeledDataset {
            features,
            n_features: self.n_features,
            labels,
            feature_names: self.feature_names.clone(),
            label_dict: self.label_dict.clone(),
            provenance: self.provenance.clone(),
        }
    }

    /// Drop the named feature columns; unknown names are ignored.
    pub fn without_features(&self, names: &[&str]) -> Self {
        let keep: Vec<usize> = self
            .feature_names
            .iter()
            .enumerate()
            .filter(|(_, n)| !names.contains(&n.as_str()))
            .map(|(i, _)| i)
            .collect();
        let mut features = Vec::with_capacity(self.n_rows() * keep.len());
        for r in 0..self.n_rows() {
            let row = self.row(r);
            for &c in &keep {
                features.push(row[c]);
            }
        }
        LabeledDataset {
            features,
            n_features: keep.len(),
            labels: self.labels.clone(),
            feature_names: keep.iter().map(|&c| self.feature_names[c].clone()).collect(),
            label_dict: self.label_dict.clone(),
            provenance: self.provenance.clone(),
        }
    }
}

/// Re-emit a cleaned dataset as CSV: feature columns in order, then the
/// label column with canonical names.
pub fn write_dataset_csv<W: Write>(data: &LabeledDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = data.feature_names.iter().map(String::as_str).collect();
    header.push(LABEL_COLUMN);
    w.write_record(&header).map_err(write_error)?;
    let mut record = Vec::with_capacity(header.len());
    for r in 0..data.n_rows() {
        record.clear();
        for v in data.row(r) {
            record.push(format!("{v}"));
        }
        record.push(data.label_dict.name_of(data.labels()[r]).to_string());
        w.write_record(&record).map_err(write_error)?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

fn write_error(e: csv::Error) -> Error {
    Error::Io {
        path: "<csv output>".into(),
        source: std::io::Error::new(std::io::ErrorKind::Other, e),
    }
}

// ---------------------------------------------------------------------------
// Stratified split
// ---------------------------------------------------------------------------

/// Seeded stratified split. Per label with `n` rows the test side receives
/// `round(test_fraction * n)` rows (round half away from zero, at least one
/// when `test_fraction > 0` and `n >= 2`); remainders stay in train. Row
/// order within each side is the shuffled order, label by label.
pub fn stratified_split(
    data: &LabeledDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(0.0..=1.0).contains(&test_fraction) || test_fraction.is_nan() {
        return Err(Error::Argument(format!(
            "test_fraction must be within [0, 1], got {test_fraction}"
        )));
    }
    let mut by_label: Vec<Vec<usize>> = vec![Vec::new(); data.label_dict.len()];
    for (row, &label) in data.labels().iter().enumerate() {
        by_label[label].push(row);
    }
    let mut rng = stream_rng(seed, 0, DOMAIN_SPLIT);
    let mut train_rows = Vec::new();
    let mut test_rows = Vec::new();
    for indices in by_label.iter_mut() {
        if indices.is_empty() {
            continue;
        }
        indices.shuffle(&mut rng);
        let n = indices.len();
        let mut n_test = (test_fraction * n as f64).round() as usize;
        n_test = n_test.min(n);
        if n_test == 0 && test_fraction > 0.0 && n >= 2 {
            n_test = 1;
        }
        test_rows.extend_from_slice(&indices[..n_test]);
        train_rows.extend_from_slice(&indices[n_test..]);
    }
    let mut train = data.subset(&train_rows);
    let mut test = data.subset(&test_rows);
    let note = format!("; split seed={seed} test_fraction={test_fraction}");
    train.provenance.push_str(&format!("{note} side=train"));
    test.provenance.push_str(&format!("{note} side=test"));
    Ok((train, test))
}

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

/// Per-feature mean and population standard deviation fitted on a training
/// split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stddevs: Vec<f64>,
    pub fitted_on: Vec<String>,
}

pub fn fit_standardizer(train: &LabeledDataset) -> Result<Standardizer> {
    let n = train.n_rows();
    if n == 0 {
        return Err(Error::Argument("cannot fit standardizer on zero rows".into()));
    }
    let d = train.n_features();
    let mut means = vec![0.0; d];
    for r in 0..n {
        for (m, v) in means.iter_mut().zip(train.row(r)) {
            *m += *v;
        }
    }
    for m in means.iter_mut() {
        *m /= n as f64;
    }
    let mut vars = vec![0.0; d];
    for r in 0..n {
        for ((var, mean), v) in vars.iter_mut().zip(&means).zip(train.row(r)) {
            let diff = *v - *mean;
            *var += diff * diff;
        }
    }
    let stddevs = vars.iter().map(|v| (v / n as f64).sqrt()).collect();
    Ok(Standardizer {
        means,
        stddevs,
        fitted_on: train.feature_names.clone(),
    })
}

/// Apply `(x - mean) / stddev`; zero-variance columns map to 0.
pub fn apply_standardizer(s: &Standardizer, data: &LabeledDataset) -> Result<LabeledDataset> {
    if s.fitted_on != data.feature_names {
        return Err(Error::Schema(
            "feature names do not match the standardizer's fitted columns".into(),
        ));
    }
    let d = data.n_features();
    let mut features = Vec::with_capacity(data.n_rows() * d);
    for r in 0..data.n_rows() {
        for (c, v) in data.row(r).iter().enumerate() {
            let sd = s.stddevs[c];
            features.push(if sd > 0.0 { (*v - s.means[c]) / sd } else { 0.0 });
        }
    }
    LabeledDataset::from_parts(
        data.feature_names.clone(),
        features,
        data.labels().to_vec(),
        data.label_dict.clone(),
        format!("{}; standardized", data.provenance),
    )
}
