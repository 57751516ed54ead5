//! Uniformly sampled, labeled time series produced by runs, with CSV
//! import/export.
//!
//! The CSV form is RFC-4180-style: a header row (`t` first), one row per
//! sample, values printed in shortest round-trip form so a re-parse
//! reproduces the numeric content exactly. Metadata (config hash, seed)
//! stays on the struct and is written to the run's config/metrics files,
//! not the CSV.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::scalar::Float;

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("row has {got} values but the record has {want} columns")]
    RowWidth { got: usize, want: usize },
    #[error("time column must be strictly increasing")]
    NonMonotoneTime,
    #[error("unknown column: {0}")]
    UnknownColumn(String),
    #[error("CSV parse error at line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord<T> {
    time_label: String,
    columns: Vec<String>,
    times: Vec<T>,
    data: Vec<Vec<T>>,
    pub metadata: BTreeMap<String, String>,
}

impl<T: Float> RunRecord<T> {
    pub fn new<S: Into<String>>(columns: Vec<S>) -> Self {
        Self::with_time_label("t", columns)
    }

    /// A record whose monotone axis is something other than time (the Bode
    /// sweeps use `omega`).
    pub fn with_time_label<S: Into<String>>(time_label: &str, columns: Vec<S>) -> Self {
        Self {
            time_label: time_label.to_string(),
            columns: columns.into_iter().map(Into::into).collect(),
            times: Vec::new(),
            data: Vec::new(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push_row(&mut self, t: T, row: Vec<T>) -> Result<(), RecordError> {
        if row.len() != self.columns.len() {
            return Err(RecordError::RowWidth {
                got: row.len(),
                want: self.columns.len(),
            });
        }
        if let Some(&last) = self.times.last() {
            if !(t > last) {
                return Err(RecordError::NonMonotoneTime);
            }
        }
        self.times.push(t);
        self.data.push(row);
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Result<usize, RecordError> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| RecordError::UnknownColumn(name.to_string()))
    }

    /// Copies one named column out of the row-major storage.
    pub fn column(&self, name: &str) -> Result<Vec<T>, RecordError> {
        let idx = self.column_index(name)?;
        Ok(self.data.iter().map(|row| row[idx]).collect())
    }

    pub fn value(&self, row: usize, col: usize) -> T {
        self.data[row][col]
    }

    pub fn row(&self, row: usize) -> &[T] {
        &self.data[row]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.time_label);
        for c in &self.columns {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (t, row) in self.times.iter().zip(&self.data) {
            let _ = write!(out, "{t}");
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), RecordError> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn from_csv(text: &str) -> Result<Self, RecordError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(RecordError::Csv {
            line: 1,
            msg: "missing header".into(),
        })?;
        let mut fields = header.split(',');
        let time_label = fields.next().ok_or(RecordError::Csv {
            line: 1,
            msg: "empty header".into(),
        })?;
        let mut record =
            Self::with_time_label(time_label, fields.map(str::to_string).collect::<Vec<_>>());
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let mut values = line.split(',').map(|f| {
                f.parse::<f64>().map(T::of).map_err(|e| RecordError::Csv {
                    line: i + 1,
                    msg: e.to_string(),
                })
            });
            let t = values.next().ok_or(RecordError::Csv {
                line: i + 1,
                msg: "empty row".into(),
            })??;
            let row = values.collect::<Result<Vec<_>, _>>()?;
            record.push_row(t, row)?;
        }
        Ok(record)
    }
}
