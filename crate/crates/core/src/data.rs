//! Multi-label datasets: CSV and MEKA-style ARFF ingestion, holdout splits and
//! label statistics.
//!
//! Row and column indices reported in errors are zero-based and count data
//! rows only (the header line is not a row).

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::seed::rng_from_seed;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("missing file: {0}")]
    MissingFile(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("non-numeric cell at row {row}, column {col}")]
    NonNumericCell { row: usize, col: usize },
    #[error("non-binary label at row {row}, column {col}")]
    NonBinaryLabel { row: usize, col: usize },
    #[error("label count {labels} leaves no feature columns among {columns} columns")]
    LabelCountExceedsColumns { labels: usize, columns: usize },
    #[error("relation name carries no '-C k' label marker")]
    MissingRelationMarker,
    #[error("unsupported attribute type for '{0}'")]
    UnsupportedAttributeType(String),
    #[error("row {row} has {found} cells, expected {expected}")]
    RaggedRow { row: usize, found: usize, expected: usize },
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("dataset has no rows")]
    Empty,
    #[error("split leaves one side empty")]
    DegenerateSplit,
    #[error("invalid dataset: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelPosition {
    Prefix,
    Suffix,
}

/// Feature matrix paired with a binary label matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub labels: Array2<u8>,
    pub feature_names: Vec<String>,
    pub label_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset after checking shape, binarity and finiteness.
    /// Column names default to `f{j}` / `y{j}`.
    pub fn new(features: Array2<f64>, labels: Array2<u8>) -> Result<Self, DataError> {
        let feature_names = (0..features.ncols()).map(|j| format!("f{j}")).collect();
        let label_names = (0..labels.ncols()).map(|j| format!("y{j}")).collect();
        Self::with_names(features, labels, feature_names, label_names)
    }

    pub fn with_names(
        features: Array2<f64>,
        labels: Array2<u8>,
        feature_names: Vec<String>,
        label_names: Vec<String>,
    ) -> Result<Self, DataError> {
        if features.nrows() == 0 {
            return Err(DataError::Empty);
        }
        if features.nrows() != labels.nrows() {
            return Err(DataError::Invalid(format!(
                "{} feature rows vs {} label rows",
                features.nrows(),
                labels.nrows()
            )));
        }
        if features.ncols() == 0 || labels.ncols() == 0 {
            return Err(DataError::Invalid("need at least one feature and one label".into()));
        }
        if feature_names.len() != features.ncols() || label_names.len() != labels.ncols() {
            return Err(DataError::Invalid("column name count mismatch".into()));
        }
        for ((row, col), &v) in features.indexed_iter() {
            if !v.is_finite() {
                return Err(DataError::NonNumericCell { row, col });
            }
        }
        for ((row, col), &v) in labels.indexed_iter() {
            if v > 1 {
                return Err(DataError::NonBinaryLabel { row, col });
            }
        }
        Ok(Dataset {
            features,
            labels,
            feature_names,
            label_names,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_labels(&self) -> usize {
        self.labels.ncols()
    }

    /// Rows in the given order (indices may repeat).
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), rows),
            labels: self.labels.select(Axis(0), rows),
            feature_names: self.feature_names.clone(),
            label_names: self.label_names.clone(),
        }
    }

    /// First `n` rows.
    pub fn head(&self, n: usize) -> Dataset {
        let rows: Vec<usize> = (0..n.min(self.n_rows())).collect();
        self.select_rows(&rows)
    }

    /// Same features with a single label column.
    pub fn label_column(&self, j: usize) -> Vec<usize> {
        self.labels.column(j).iter().map(|&v| v as usize).collect()
    }
}

fn parse_cell(raw: &str, row: usize, col: usize) -> Result<f64, DataError> {
    match raw.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(DataError::NonNumericCell { row, col }),
    }
}

fn parse_label(raw: &str, row: usize, col: usize) -> Result<u8, DataError> {
    let v = parse_cell(raw, row, col)?;
    if v == 0.0 {
        Ok(0)
    } else if v == 1.0 {
        Ok(1)
    } else {
        Err(DataError::NonBinaryLabel { row, col })
    }
}

/// Splits parsed rows into features and labels. `label_cols` holds the
/// column indices (in file order) that are labels.
fn assemble(names: Vec<String>, rows: Vec<Vec<String>>, label_cols: &[usize]) -> Result<Dataset, DataError> {
    let n_cols = names.len();
    let is_label: Vec<bool> = (0..n_cols).map(|c| label_cols.contains(&c)).collect();
    let m = label_cols.len();
    let d = n_cols - m;
    let s = rows.len();
    if s == 0 {
        return Err(DataError::Empty);
    }
    let mut features = Array2::<f64>::zeros((s, d));
    let mut labels = Array2::<u8>::zeros((s, m));
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n_cols {
            return Err(DataError::RaggedRow {
                row: i,
                found: row.len(),
                expected: n_cols,
            });
        }
        let (mut fj, mut lj) = (0, 0);
        for (c, cell) in row.iter().enumerate() {
            if is_label[c] {
                labels[[i, lj]] = parse_label(cell, i, c)?;
                lj += 1;
            } else {
                features[[i, fj]] = parse_cell(cell, i, c)?;
                fj += 1;
            }
        }
    }
    let mut feature_names = Vec::with_capacity(d);
    let mut label_names = Vec::with_capacity(m);
    for (c, name) in names.into_iter().enumerate() {
        if is_label[c] {
            label_names.push(name);
        } else {
            feature_names.push(name);
        }
    }
    Dataset::with_names(features, labels, feature_names, label_names)
}

fn read_file(path: &Path) -> Result<String, DataError> {
    if !path.exists() {
        return Err(DataError::MissingFile(path.display().to_string()));
    }
    Ok(fs::read_to_string(path)?)
}

/// Reads a headed, comma-separated numeric file whose first or last
/// `label_count` columns are 0/1 labels.
pub fn load_csv(
    path: impl AsRef<Path>,
    label_count: usize,
    label_position: LabelPosition,
) -> Result<Dataset, DataError> {
    let text = read_file(path.as_ref())?;
    parse_csv(&text, label_count, label_position)
}

pub fn parse_csv(text: &str, label_count: usize, label_position: LabelPosition) -> Result<Dataset, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let names: Vec<String> = reader
        .headers()
        .map_err(|e| DataError::Malformed(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let columns = names.len();
    if label_count == 0 || label_count >= columns {
        return Err(DataError::LabelCountExceedsColumns {
            labels: label_count,
            columns,
        });
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| DataError::Malformed(e.to_string()))?;
        rows.push(record.iter().map(str::to_string).collect());
    }
    let label_cols: Vec<usize> = match label_position {
        LabelPosition::Prefix => (0..label_count).collect(),
        LabelPosition::Suffix => (columns - label_count..columns).collect(),
    };
    assemble(names, rows, &label_cols)
}

/// Writes the dataset in the CSV layout [`load_csv`] reads.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>, label_position: LabelPosition) -> Result<(), DataError> {
    let mut out = fs::File::create(path)?;
    out.write_all(to_csv_string(ds, label_position).as_bytes())?;
    Ok(())
}

pub fn to_csv_string(ds: &Dataset, label_position: LabelPosition) -> String {
    let mut header: Vec<&str> = Vec::new();
    let feats = ds.feature_names.iter().map(String::as_str);
    let labs = ds.label_names.iter().map(String::as_str);
    match label_position {
        LabelPosition::Prefix => header.extend(labs.chain(feats)),
        LabelPosition::Suffix => header.extend(feats.chain(labs)),
    }
    let mut text = header.join(",");
    text.push('\n');
    for i in 0..ds.n_rows() {
        let f = ds.features.row(i).iter().map(|v| format!("{v}")).collect::<Vec<_>>();
        let l = ds.labels.row(i).iter().map(|v| v.to_string()).collect::<Vec<_>>();
        let cells = match label_position {
            LabelPosition::Prefix => [l, f].concat(),
            LabelPosition::Suffix => [f, l].concat(),
        };
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    text
}

/// Reads a dense, numeric MEKA-style ARFF file.
///
/// The relation name must carry a `-C k` marker; the first `|k|` attributes
/// are labels for either sign of `k`.
pub fn load_meka_arff(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let text = read_file(path.as_ref())?;
    parse_meka_arff(&text)
}

fn unquote(s: &str) -> &str {
    let s = s.trim();
    for q in ['\'', '"'] {
        if s.len() >= 2 && s.starts_with(q) && s.ends_with(q) {
            return &s[1..s.len() - 1];
        }
    }
    s
}

/// Splits `@attribute <name> <type>` into name and type, honoring quotes.
fn split_attribute(rest: &str) -> Result<(String, String), DataError> {
    let rest = rest.trim();
    let (name, ty) = if let Some(q) = rest.chars().next().filter(|c| *c == '\'' || *c == '"') {
        let end = rest[1..]
            .find(q)
            .ok_or_else(|| DataError::Malformed(format!("unterminated quote in '{rest}'")))?;
        (&rest[1..end + 1], &rest[end + 2..])
    } else {
        match rest.find(char::is_whitespace) {
            Some(i) => (&rest[..i], &rest[i..]),
            None => return Err(DataError::Malformed(format!("attribute without type: '{rest}'"))),
        }
    };
    Ok((name.to_string(), ty.trim().to_string()))
}

fn label_marker(relation: &str) -> Option<i64> {
    let idx = relation.find("-C")?;
    let tail = relation[idx + 2..].trim_start();
    let end = tail
        .char_indices()
        .find(|&(i, c)| !(c.is_ascii_digit() || (i == 0 && (c == '-' || c == '+'))))
        .map(|(i, _)| i)
        .unwrap_or(tail.len());
    tail[..end].parse().ok()
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum AttrKind {
    Numeric,
    Binary,
}

pub fn parse_meka_arff(text: &str) -> Result<Dataset, DataError> {
    let mut relation: Option<String> = None;
    let mut attrs: Vec<(String, AttrKind)> = Vec::new();
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut in_data = false;
    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        if in_data {
            if line.starts_with('{') {
                return Err(DataError::Malformed("sparse ARFF rows are not supported".into()));
            }
            rows.push(line.split(',').map(|c| unquote(c).to_string()).collect());
            continue;
        }
        let lower = line.to_ascii_lowercase();
        if lower.starts_with("@relation") {
            relation = Some(unquote(&line["@relation".len()..]).to_string());
        } else if lower.starts_with("@attribute") {
            let (name, ty) = split_attribute(&line["@attribute".len()..])?;
            let ty_lower = ty.to_ascii_lowercase();
            let kind = match ty_lower.as_str() {
                "numeric" | "real" | "integer" => AttrKind::Numeric,
                _ if ty_lower.starts_with('{') => {
                    let values: Vec<String> = ty_lower
                        .trim_start_matches('{')
                        .trim_end_matches('}')
                        .split(',')
                        .map(|v| unquote(v).to_string())
                        .collect();
                    let mut sorted = values.clone();
                    sorted.sort();
                    if sorted == ["0", "1"] {
                        AttrKind::Binary
                    } else {
                        return Err(DataError::UnsupportedAttributeType(name));
                    }
                }
                _ => return Err(DataError::UnsupportedAttributeType(name)),
            };
            attrs.push((name, kind));
        } else if lower.starts_with("@data") {
            in_data = true;
        } else {
            return Err(DataError::Malformed(format!("unexpected header line '{line}'")));
        }
    }
    let relation = relation.ok_or(DataError::MissingRelationMarker)?;
    let k = label_marker(&relation).ok_or(DataError::MissingRelationMarker)?;
    let m = k.unsigned_abs() as usize;
    if m == 0 || m >= attrs.len() {
        return Err(DataError::LabelCountExceedsColumns {
            labels: m,
            columns: attrs.len(),
        });
    }
    let names = attrs.iter().map(|(n, _)| n.clone()).collect();
    let label_cols: Vec<usize> = (0..m).collect();
    assemble(names, rows, &label_cols)
}

/// Row indices of a seeded holdout split: shuffled order, the first
/// `ceil(train_ratio * n)` rows form the training part.
pub fn split_indices(n: usize, train_ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), DataError> {
    if !(train_ratio > 0.0 && train_ratio < 1.0) || n < 2 {
        return Err(DataError::DegenerateSplit);
    }
    let n_train = (train_ratio * n as f64 - 1e-9).ceil() as usize;
    if n_train == 0 || n_train >= n {
        return Err(DataError::DegenerateSplit);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let test = order.split_off(n_train);
    Ok((order, test))
}

pub fn split_holdout(ds: &Dataset, train_ratio: f64, seed: u64) -> Result<(Dataset, Dataset), DataError> {
    let (train, test) = split_indices(ds.n_rows(), train_ratio, seed)?;
    Ok((ds.select_rows(&train), ds.select_rows(&test)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelStats {
    pub cardinality: f64,
    pub density: f64,
    pub distinct_labelsets: usize,
    pub per_label_frequency: Vec<f64>,
}

pub fn label_stats(ds: &Dataset) -> LabelStats {
    let s = ds.n_rows() as f64;
    let m = ds.n_labels();
    let ones: usize = ds.labels.iter().map(|&v| v as usize).sum();
    let cardinality = ones as f64 / s;
    let distinct: HashSet<Vec<u8>> = ds.labels.rows().into_iter().map(|r| r.to_vec()).collect();
    let per_label_frequency = (0..m)
        .map(|j| ds.labels.column(j).iter().map(|&v| v as f64).sum::<f64>() / s)
        .collect();
    LabelStats {
        cardinality,
        density: ones as f64 / (s * m as f64),
        distinct_labelsets: distinct.len(),
        per_label_frequency,
    }
}
