//! Named document-by-feature matrices and their CSV form.
//!
//! The CSV layout is `doc_id,<feature>,...` with one row per document. Values
//! are written in scientific notation with 17 significant digits, which is
//! enough for every finite `f64` to read back bit-identical.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    feature_names: Vec<String>,
    doc_ids: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn new(
        feature_names: Vec<String>,
        doc_ids: Vec<String>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if doc_ids.len() != rows.len() {
            return Err(Error::Arity(format!(
                "{} doc ids for {} rows",
                doc_ids.len(),
                rows.len()
            )));
        }
        let mut names = HashSet::new();
        for name in &feature_names {
            if !names.insert(name.as_str()) {
                return Err(Error::DuplicateFeature(name.clone()));
            }
        }
        for (id, row) in doc_ids.iter().zip(&rows) {
            if row.len() != feature_names.len() {
                return Err(Error::Arity(format!(
                    "row {id} has {} values for {} features",
                    row.len(),
                    feature_names.len()
                )));
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "row {id}, feature {}",
                    feature_names[j]
                )));
            }
        }
        Ok(FeatureMatrix {
            feature_names,
            doc_ids,
            rows,
        })
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    /// Rows reordered (and possibly subset) to follow `doc_ids`.
    pub fn select(&self, doc_ids: &[String]) -> Result<FeatureMatrix> {
        let index: HashMap<&str, usize> = self
            .doc_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let mut rows = Vec::with_capacity(doc_ids.len());
        for id in doc_ids {
            let &i = index
                .get(id.as_str())
                .ok_or_else(|| Error::DocMismatch(format!("no row for document {id}")))?;
            rows.push(self.rows[i].clone());
        }
        Ok(FeatureMatrix {
            feature_names: self.feature_names.clone(),
            doc_ids: doc_ids.to_vec(),
            rows,
        })
    }
}

fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_feature_matrix(matrix: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = feature_matrix_to_csv(matrix);
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn feature_matrix_to_csv(matrix: &FeatureMatrix) -> Vec<u8> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let header = std::iter::once("doc_id").chain(matrix.feature_names.iter().map(String::as_str));
    writer.write_record(header).expect("in-memory write");
    for (id, row) in matrix.doc_ids.iter().zip(&matrix.rows) {
        let record = std::iter::once(id.clone()).chain(row.iter().map(|&v| format_value(v)));
        writer.write_record(record).expect("in-memory write");
    }
    writer.into_inner().expect("in-memory flush")
}

pub fn read_feature_matrix(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    feature_matrix_from_csv(&bytes)
}

pub fn feature_matrix_from_csv(bytes: &[u8]) -> Result<FeatureMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes);
    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| csv_error(1, e))?,
        None => {
            return Err(Error::Malformed {
                line: 1,
                message: "missing header".into(),
            })
        }
    };
    if header.get(0) != Some("doc_id") {
        return Err(Error::Malformed {
            line: 1,
            message: "first column must be doc_id".into(),
        });
    }
    let feature_names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut doc_ids = Vec::new();
    let mut rows = Vec::new();
    for (i, record) in records.enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| csv_error(line, e))?;
        if record.len() != header.len() {
            return Err(Error::Arity(format!(
                "line {line}: {} fields under a {}-column header",
                record.len(),
                header.len()
            )));
        }
        let mut row = Vec::with_capacity(feature_names.len());
        for (j, field) in record.iter().enumerate().skip(1) {
            let v: f64 = field.trim().parse().map_err(|_| Error::Malformed {
                line,
                message: format!("cannot parse {field:?} as a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite(format!(
                    "line {line}, column {}",
                    feature_names[j - 1]
                )));
            }
            row.push(v);
        }
        doc_ids.push(record[0].to_string());
        rows.push(row);
    }
    let mut seen = HashSet::new();
    for (i, id) in doc_ids.iter().enumerate() {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateId {
                id: id.clone(),
                line: i + 2,
            });
        }
    }
    FeatureMatrix::new(feature_names, doc_ids, rows)
}

fn csv_error(line: usize, e: csv::Error) -> Error {
    Error::Malformed {
        line,
        message: e.to_string(),
    }
}
