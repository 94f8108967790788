use std::fs::File;
use std::io::{self, BufRead, BufReader, Read};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("the last column must be named 'y', found '{0}'")]
    MissingLabel(String),
    #[error("label {0} is not binary")]
    BadLabel(String),
    #[error("{0} rows of features but {1} labels")]
    LengthMismatch(usize, usize),
    #[error("dataset contains only label {0}")]
    SingleClass(u8),
    #[error("dataset is empty")]
    Empty,
}

/// Immutable labelled examples, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n_rows: usize,
    n_features: usize,
    values: Vec<f64>,
    labels: Vec<u8>,
    names: Vec<String>,
}

impl Dataset {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<u8>, names: Vec<String>) -> Result<Self, DatasetError> {
        if rows.len() != labels.len() {
            return Err(DatasetError::LengthMismatch(rows.len(), labels.len()));
        }
        let n_features = names.len();
        let mut values = Vec::with_capacity(rows.len() * n_features);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_features {
                return Err(DatasetError::Parse {
                    line: i + 1,
                    msg: format!("expected {n_features} values, found {}", row.len()),
                });
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(DatasetError::Parse { line: i + 1, msg: format!("non-finite value {v}") });
            }
            values.extend_from_slice(row);
        }
        if let Some(&bad) = labels.iter().find(|&&y| y > 1) {
            return Err(DatasetError::BadLabel(bad.to_string()));
        }
        let data = Self { n_rows: rows.len(), n_features, values, labels, names };
        data.check_classes()?;
        Ok(data)
    }

    fn check_classes(&self) -> Result<(), DatasetError> {
        let Some(&first) = self.labels.first() else {
            return Err(DatasetError::Empty);
        };
        if self.labels.iter().all(|&y| y == first) {
            return Err(DatasetError::SingleClass(first));
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn label(&self, row: usize) -> u8 {
        self.labels[row]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.n_features..(row + 1) * self.n_features]
    }

    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.values[row * self.n_features + feature]
    }

    /// Multiply every value by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }

    /// Header row of feature names followed by `y`; one example per line.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self, DatasetError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let last = headers.iter().next_back().unwrap_or("").to_string();
        if last != "y" {
            return Err(DatasetError::MissingLabel(last));
        }
        let names: Vec<String> = headers.iter().take(headers.len() - 1).map(str::to_string).collect();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            let line = i + 2;
            let mut row = Vec::with_capacity(names.len());
            for field in record.iter().take(record.len().saturating_sub(1)) {
                row.push(field.parse::<f64>().map_err(|e| DatasetError::Parse {
                    line,
                    msg: format!("'{field}': {e}"),
                })?);
            }
            labels.push(parse_label(record.iter().next_back().unwrap_or(""), false)?);
            rows.push(row);
        }
        Self::new(rows, labels, names)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        Self::from_csv_reader(File::open(path)?)
    }

    /// Whitespace-separated numeric matrix plus one `+1`/`-1` label per line.
    pub fn from_madelon_readers<D: Read, L: Read>(data: D, labels: L) -> Result<Self, DatasetError> {
        let mut rows = Vec::new();
        for (i, line) in BufReader::new(data).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>()
                        .map_err(|e| DatasetError::Parse { line: i + 1, msg: format!("'{tok}': {e}") })
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        let mut ys = Vec::new();
        for line in BufReader::new(labels).lines() {
            let line = line?;
            if !line.trim().is_empty() {
                ys.push(parse_label(line.trim(), true)?);
            }
        }
        let n_features = rows.first().map_or(0, Vec::len);
        let names = (0..n_features).map(|j| format!("f{j}")).collect();
        Self::new(rows, ys, names)
    }

    pub fn from_madelon_paths(data: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<Self, DatasetError> {
        Self::from_madelon_readers(File::open(data)?, File::open(labels)?)
    }

    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<(), DatasetError> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = self.names.clone();
        header.push("y".to_string());
        wtr.write_record(&header)?;
        for i in 0..self.n_rows {
            let mut rec: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            rec.push(self.labels[i].to_string());
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn parse_label(field: &str, signed: bool) -> Result<u8, DatasetError> {
    match (field, signed) {
        ("1" | "+1", _) => Ok(1),
        ("0", false) | ("-1", true) => Ok(0),
        _ => Err(DatasetError::BadLabel(field.to_string())),
    }
}
