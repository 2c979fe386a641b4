//! JSON and CSV serialization of level covariance matrices.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::gcs::BlockCovariance;
use super::partition::GroupPartition;
use crate::error::{Error, Result};

/// `{"size": L, "partition": [n_1, ..], "data": [row-major entries]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixDocument {
    pub size: usize,
    pub partition: Vec<usize>,
    pub data: Vec<f64>,
}

impl MatrixDocument {
    pub fn from_matrix(matrix: &DMatrix<f64>, partition: &GroupPartition) -> Self {
        let n = matrix.nrows();
        let data = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|ij| matrix[ij]).collect();
        Self { size: n, partition: partition.sizes().to_vec(), data }
    }

    pub fn from_block(t: &BlockCovariance) -> Self {
        Self::from_matrix(t.matrix(), t.partition())
    }

    pub fn matrix(&self) -> Result<DMatrix<f64>> {
        if self.data.len() != self.size * self.size {
            return Err(Error::Parse(format!(
                "\"data\" has {} entries, expected size² = {}",
                self.data.len(),
                self.size * self.size
            )));
        }
        Ok(DMatrix::from_row_slice(self.size, self.size, &self.data))
    }

    pub fn partition(&self) -> Result<GroupPartition> {
        let p = GroupPartition::new(self.partition.clone())
            .map_err(|e| Error::Parse(format!("\"partition\": {e}")))?;
        if p.level_count() != self.size {
            return Err(Error::Parse(format!(
                "\"partition\" covers {} levels but \"size\" is {}",
                p.level_count(),
                self.size
            )));
        }
        Ok(p)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Writes `matrix` as CSV, preceded by a header row when `labels` is given.
pub fn write_matrix_csv<W: Write>(
    writer: W,
    matrix: &DMatrix<f64>,
    labels: Option<&[String]>,
) -> Result<()> {
    let n = matrix.nrows();
    let mut w = csv::Writer::from_writer(writer);
    match labels {
        Some(l) if l.len() == n => w.write_record(l)?,
        Some(l) => {
            return Err(Error::Domain(format!("{} labels for a {n}x{n} matrix", l.len())));
        }
        None => {}
    }
    for i in 0..n {
        w.write_record(matrix.row(i).iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a square matrix from CSV. A first row that does not parse as numbers is taken
/// as a header of level labels.
pub fn read_matrix_csv<R: Read>(reader: R) -> Result<(DMatrix<f64>, Option<Vec<String>>)> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels = None;
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if line == 0 => labels = Some(rec.iter().map(str::to_string).collect()),
            Err(e) => {
                return Err(Error::Parse(format!("line {}: {e}", line + 1)));
            }
        }
    }
    let n = rows.len();
    if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(Error::Parse(format!(
            "matrix row {} has {} fields, expected {n}",
            i + 1,
            row.len()
        )));
    }
    Ok((DMatrix::from_fn(n, n, |i, j| rows[i][j]), labels))
}
