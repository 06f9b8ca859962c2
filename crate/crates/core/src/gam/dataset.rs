use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

/// Unbinned training data: one real vector per row plus a 0/1 label.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    feature_names: Vec<String>,
    rows: Vec<Vec<f64>>,
    labels: Vec<u8>,
}

impl RawDataset {
    pub fn new(feature_names: Vec<String>, rows: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Dataset("dataset has no rows".into()));
        }
        if rows.len() != labels.len() {
            return Err(Error::Dataset(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let p = feature_names.len();
        if p == 0 {
            return Err(Error::Dataset("dataset has no features".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::Dataset(format!(
                    "row {i} has {} values, expected {p}",
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::Dataset(format!("row {i} contains non-finite value {v}")));
            }
        }
        if let Some((i, y)) = labels.iter().enumerate().find(|(_, &y)| y > 1) {
            return Err(Error::Dataset(format!("label {y} in row {i} is not 0 or 1")));
        }
        Ok(Self {
            feature_names,
            rows,
            labels,
        })
    }

    /// Reads a CSV with a header row; the last column is the label.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() < 2 {
            return Err(Error::Dataset(
                "CSV needs at least one feature column and a label column".into(),
            ));
        }
        let p = headers.len() - 1;
        let feature_names = headers.iter().take(p).map(|s| s.trim().to_string()).collect();

        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            let mut row = Vec::with_capacity(p);
            for (j, field) in record.iter().take(p).enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::Dataset(format!("row {i}, column {j}: cannot parse `{field}` as a number"))
                })?;
                row.push(v);
            }
            let raw_label = record.get(p).unwrap_or("").trim();
            let label = match raw_label {
                "0" | "0.0" => 0,
                "1" | "1.0" => 1,
                other => {
                    return Err(Error::Dataset(format!(
                        "row {i}: label `{other}` is not 0 or 1"
                    )))
                }
            };
            rows.push(row);
            labels.push(label);
        }
        Self::new(feature_names, rows, labels)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(std::io::BufReader::new(file))
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn p(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// Rows picked by index (repeats allowed, as in a bootstrap resample).
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let rows = indices.iter().map(|&i| self.rows[i].clone()).collect();
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Self::new(self.feature_names.clone(), rows, labels)
    }
}
