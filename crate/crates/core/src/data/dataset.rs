use std::collections::BTreeSet;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::schema::{ColumnKind, Delimiter, Schema};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum AttributeKind {
    Numeric,
    Categorical { categories: Vec<String> },
}

/// One original attribute and the preprocessed columns it occupies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub kind: AttributeKind,
    pub columns: Range<usize>,
}

impl Attribute {
    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, AttributeKind::Categorical { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub sha256: String,
    pub schema: Option<Schema>,
}

#[derive(Debug, Clone)]
enum RawColumn {
    Numeric {
        name: String,
        values: Vec<Option<f64>>,
    },
    Categorical {
        name: String,
        categories: Vec<String>,
        values: Vec<Option<usize>>,
    },
}

#[derive(Debug, Clone, Copy)]
enum ColumnStats {
    Numeric { fill: f64, min: f64, max: f64 },
    Categorical { fill: usize },
}

/// Preprocessed, immutable labelled dataset.
///
/// Numeric columns are mean-imputed and min-max scaled to `[0, 1]`;
/// categorical columns are mode-imputed and one-hot encoded. Statistics come
/// from all rows unless the dataset was [refit](Dataset::refit) on a subset.
#[derive(Debug, Clone)]
pub struct Dataset {
    name: String,
    features: Matrix<f64>,
    labels: Vec<usize>,
    class_names: Vec<String>,
    attributes: Vec<Attribute>,
    provenance: Provenance,
    raw: Vec<RawColumn>,
}

fn split_line(line: &str, delimiter: Delimiter) -> Vec<String> {
    match delimiter {
        Delimiter::Comma => line.split(',').map(|s| s.trim().to_owned()).collect(),
        Delimiter::Whitespace => line.split_whitespace().map(str::to_owned).collect(),
    }
}

fn read_records(path: &Path, bytes: &[u8], schema: &Schema) -> Result<Vec<Vec<String>>> {
    let mut records = Vec::new();
    match schema.delimiter {
        Delimiter::Comma => {
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(schema.header)
                .flexible(true)
                .trim(csv::Trim::All)
                .from_reader(bytes);
            for rec in reader.records() {
                let rec = rec?;
                if rec.iter().all(str::is_empty) {
                    continue;
                }
                records.push(rec.iter().map(str::to_owned).collect());
            }
        }
        Delimiter::Whitespace => {
            let text = std::str::from_utf8(bytes)
                .map_err(|e| Error::data(path, format!("not valid UTF-8: {e}")))?;
            let mut lines = text.lines().filter(|l| !l.trim().is_empty());
            if schema.header {
                lines.next();
            }
            records.extend(lines.map(|l| split_line(l, schema.delimiter)));
        }
    }
    Ok(records)
}

impl Dataset {
    /// Loads and preprocesses a delimited text file described by `schema`.
    pub fn load(path: &Path, schema: &Schema) -> Result<Self> {
        schema.validate()?;
        let bytes = std::fs::read(path)
            .map_err(|e| Error::data(path, format!("cannot read file: {e}")))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::parse(&name, path, &bytes, schema)
    }

    pub fn parse(name: &str, path: &Path, bytes: &[u8], schema: &Schema) -> Result<Self> {
        let records = read_records(path, bytes, schema)?;
        if records.is_empty() {
            return Err(Error::data(path, "no data rows"));
        }
        let width = schema.columns.len();
        for (i, r) in records.iter().enumerate() {
            if r.len() != width {
                return Err(Error::data(
                    path,
                    format!("row {}: expected {width} fields, found {}", i + 1, r.len()),
                ));
            }
        }

        let target = schema.target_index();
        let target_spec = &schema.columns[target];
        let mut class_set = BTreeSet::new();
        for (i, r) in records.iter().enumerate() {
            if r[target] == target_spec.missing_token || r[target].is_empty() {
                return Err(Error::data(path, format!("row {}: missing class label", i + 1)));
            }
            class_set.insert(r[target].clone());
        }
        let class_names: Vec<String> = match &target_spec.categories {
            Some(c) => {
                if let Some(bad) = class_set.iter().find(|v| !c.contains(v)) {
                    return Err(Error::Config(format!(
                        "class `{bad}` is not listed for target `{}`",
                        target_spec.name
                    )));
                }
                c.iter().filter(|v| class_set.contains(*v)).cloned().collect()
            }
            None => class_set.into_iter().collect(),
        };
        if class_names.len() < 2 {
            return Err(Error::data(path, "need at least two classes"));
        }
        let labels = records
            .iter()
            .map(|r| class_names.iter().position(|c| *c == r[target]).expect("collected"))
            .collect();

        let mut raw = Vec::new();
        for (j, spec) in schema.columns.iter().enumerate() {
            match spec.kind {
                ColumnKind::Target | ColumnKind::Ignore => {}
                ColumnKind::Numeric => {
                    let mut values = Vec::with_capacity(records.len());
                    for (i, r) in records.iter().enumerate() {
                        let cell = &r[j];
                        if *cell == spec.missing_token || cell.is_empty() {
                            values.push(None);
                            continue;
                        }
                        let v: f64 = cell.parse().map_err(|_| Error::Parse {
                            row: i + 1,
                            column: spec.name.clone(),
                            value: cell.clone(),
                        })?;
                        if !v.is_finite() {
                            return Err(Error::Parse {
                                row: i + 1,
                                column: spec.name.clone(),
                                value: cell.clone(),
                            });
                        }
                        values.push(Some(v));
                    }
                    raw.push(RawColumn::Numeric {
                        name: spec.name.clone(),
                        values,
                    });
                }
                ColumnKind::Categorical => {
                    let present: BTreeSet<&str> = records
                        .iter()
                        .map(|r| r[j].as_str())
                        .filter(|c| *c != spec.missing_token && !c.is_empty())
                        .collect();
                    let categories: Vec<String> = match &spec.categories {
                        Some(c) => {
                            if let Some(bad) = present.iter().find(|v| !c.iter().any(|x| x == *v)) {
                                return Err(Error::Config(format!(
                                    "unknown category `{bad}` in column `{}`",
                                    spec.name
                                )));
                            }
                            c.clone()
                        }
                        None => present.into_iter().map(str::to_owned).collect(),
                    };
                    if categories.is_empty() {
                        return Err(Error::data(
                            path,
                            format!("column `{}` has no values", spec.name),
                        ));
                    }
                    let values = records
                        .iter()
                        .map(|r| categories.iter().position(|c| *c == r[j]))
                        .collect();
                    raw.push(RawColumn::Categorical {
                        name: spec.name.clone(),
                        categories,
                        values,
                    });
                }
            }
        }

        let provenance = Provenance {
            source: path.display().to_string(),
            sha256: sha256_hex(bytes),
            schema: Some(schema.clone()),
        };
        let all: Vec<usize> = (0..records.len()).collect();
        Ok(Self::assemble(name.to_owned(), labels, class_names, raw, provenance, &all))
    }

    /// Wraps an already numeric feature matrix; every column becomes one
    /// numeric attribute and is min-max scaled like a loaded file.
    pub fn from_matrix(
        name: &str,
        features: &Matrix<f64>,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::shape(features.rows(), labels.len(), "labels"));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::Config(format!("label {bad} has no class name")));
        }
        let raw = (0..features.cols())
            .map(|j| RawColumn::Numeric {
                name: format!("x{j}"),
                values: features.iter_rows().map(|r| Some(r[j])).collect(),
            })
            .collect();
        let bytes: Vec<u8> = features
            .as_slice()
            .iter()
            .flat_map(|v| v.to_le_bytes())
            .chain(labels.iter().flat_map(|l| (*l as u64).to_le_bytes()))
            .collect();
        let provenance = Provenance {
            source: format!("in-memory:{name}"),
            sha256: sha256_hex(&bytes),
            schema: None,
        };
        let all: Vec<usize> = (0..labels.len()).collect();
        Ok(Self::assemble(name.to_owned(), labels, class_names, raw, provenance, &all))
    }

    fn assemble(
        name: String,
        labels: Vec<usize>,
        class_names: Vec<String>,
        raw: Vec<RawColumn>,
        provenance: Provenance,
        fit_rows: &[usize],
    ) -> Self {
        let stats: Vec<ColumnStats> = raw.iter().map(|c| fit_column(c, fit_rows)).collect();
        let mut attributes = Vec::with_capacity(raw.len());
        let mut width = 0;
        for col in &raw {
            let (name, kind, w) = match col {
                RawColumn::Numeric { name, .. } => (name.clone(), AttributeKind::Numeric, 1),
                RawColumn::Categorical {
                    name, categories, ..
                } => (
                    name.clone(),
                    AttributeKind::Categorical {
                        categories: categories.clone(),
                    },
                    categories.len(),
                ),
            };
            attributes.push(Attribute {
                name,
                kind,
                columns: width..width + w,
            });
            width += w;
        }
        let n = labels.len();
        let mut features = Matrix::zeros(n, width);
        for (col, (st, attr)) in raw.iter().zip(stats.iter().zip(&attributes)) {
            for i in 0..n {
                let row = features.row_mut(i);
                match (col, st) {
                    (RawColumn::Numeric { values, .. }, ColumnStats::Numeric { fill, min, max }) => {
                        let v = values[i].unwrap_or(*fill);
                        let scaled = if max > min { (v - min) / (max - min) } else { 0.0 };
                        row[attr.columns.start] = scaled.clamp(0.0, 1.0);
                    }
                    (RawColumn::Categorical { values, .. }, ColumnStats::Categorical { fill }) => {
                        let c = values[i].unwrap_or(*fill);
                        row[attr.columns.start + c] = 1.0;
                    }
                    _ => unreachable!("stats follow column kinds"),
                }
            }
        }
        Self {
            name,
            features,
            labels,
            class_names,
            attributes,
            provenance,
            raw,
        }
    }

    /// Same rows, with imputation and scaling statistics recomputed from
    /// `rows` only. Values outside the fitted range are clamped to `[0, 1]`.
    pub fn refit(&self, rows: &[usize]) -> Self {
        Self::assemble(
            self.name.clone(),
            self.labels.clone(),
            self.class_names.clone(),
            self.raw.clone(),
            self.provenance.clone(),
            rows,
        )
    }

    pub fn with_name(mut self, name: &str) -> Self {
        name.clone_into(&mut self.name);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Preprocessed width.
    pub fn width(&self) -> usize {
        self.features.cols()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn features(&self) -> &Matrix<f64> {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

fn fit_column(col: &RawColumn, rows: &[usize]) -> ColumnStats {
    match col {
        RawColumn::Numeric { values, .. } => {
            let present: Vec<f64> = rows.iter().filter_map(|&i| values[i]).collect();
            if present.is_empty() {
                return ColumnStats::Numeric {
                    fill: 0.0,
                    min: 0.0,
                    max: 0.0,
                };
            }
            let fill = present.iter().sum::<f64>() / present.len() as f64;
            let min = present.iter().copied().fold(f64::INFINITY, f64::min);
            let max = present.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            ColumnStats::Numeric { fill, min, max }
        }
        RawColumn::Categorical {
            categories, values, ..
        } => {
            let mut counts = vec![0usize; categories.len()];
            for &i in rows {
                if let Some(c) = values[i] {
                    counts[c] += 1;
                }
            }
            // first maximum: ties go to the earliest category
            let fill = counts
                .iter()
                .enumerate()
                .fold((0, 0), |best, (c, &n)| if n > best.1 { (c, n) } else { best })
                .0;
            ColumnStats::Categorical { fill }
        }
    }
}
