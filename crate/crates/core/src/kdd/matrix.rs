//! Row-per-instance feature matrices with per-row labels.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::schema::Category;
use super::IngestError;

/// Where a matrix came from: one known category file, one zero-shot attack
/// file, or a combination of several.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SourceTag {
    KnownCategory(Category),
    ZeroShotAttack(String),
    Combined(String),
}

impl SourceTag {
    pub fn describe(&self) -> String {
        match self {
            SourceTag::KnownCategory(c) => format!("KC:{c}"),
            SourceTag::ZeroShotAttack(a) => format!("ZSC:{a}"),
            SourceTag::Combined(name) => format!("combined:{name}"),
        }
    }
}

/// A real m-by-d matrix of encoded attribute values with one label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: DMatrix<f64>,
    labels: Vec<String>,
    column_names: Vec<String>,
    source: SourceTag,
}

impl FeatureMatrix {
    pub fn new(
        values: DMatrix<f64>,
        labels: Vec<String>,
        column_names: Vec<String>,
        source: SourceTag,
    ) -> Result<Self, IngestError> {
        if values.nrows() != labels.len() {
            return Err(IngestError::LabelCountMismatch {
                rows: values.nrows(),
                labels: labels.len(),
            });
        }
        if values.ncols() != column_names.len() {
            return Err(IngestError::ColumnCountMismatch {
                cols: values.ncols(),
                names: column_names.len(),
            });
        }
        if let Some((i, j)) = find_non_finite(&values) {
            return Err(IngestError::NonFiniteValue { row: i, col: j });
        }
        Ok(Self {
            values,
            labels,
            column_names,
            source,
        })
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn source(&self) -> &SourceTag {
        &self.source
    }

    pub fn row(&self, i: usize) -> nalgebra::RowDVector<f64> {
        self.values.row(i).into_owned()
    }

    /// Contiguous row range [start, stop) as a new matrix, labels included.
    pub fn slice_rows(&self, start: usize, stop: usize) -> FeatureMatrix {
        assert!(start <= stop && stop <= self.rows());
        FeatureMatrix {
            values: self.values.rows(start, stop - start).into_owned(),
            labels: self.labels[start..stop].to_vec(),
            column_names: self.column_names.clone(),
            source: self.source.clone(),
        }
    }

    /// Stacks matrices with identical columns, preserving argument order.
    pub fn vstack(parts: &[&FeatureMatrix], source: SourceTag) -> Result<Self, IngestError> {
        let first = parts.first().ok_or(IngestError::EmptyInput)?;
        let cols = first.cols();
        let names = first.column_names.clone();
        let mut rows = 0;
        for part in parts {
            if part.cols() != cols || part.column_names != names {
                return Err(IngestError::ColumnCountMismatch {
                    cols: part.cols(),
                    names: names.len(),
                });
            }
            rows += part.rows();
        }
        let mut values = DMatrix::<f64>::zeros(rows, cols);
        let mut labels = Vec::with_capacity(rows);
        let mut offset = 0;
        for part in parts {
            values
                .rows_mut(offset, part.rows())
                .copy_from(&part.values);
            labels.extend_from_slice(&part.labels);
            offset += part.rows();
        }
        FeatureMatrix::new(values, labels, names, source)
    }

    /// Appends a constant column of ones (used to give every row a nonzero
    /// norm before rank-1 subspace distances).
    pub fn with_constant_column(&self) -> FeatureMatrix {
        let mut values = DMatrix::<f64>::zeros(self.rows(), self.cols() + 1);
        values.columns_mut(0, self.cols()).copy_from(&self.values);
        values.column_mut(self.cols()).fill(1.0);
        let mut column_names = self.column_names.clone();
        column_names.push("bias".to_string());
        FeatureMatrix {
            values,
            labels: self.labels.clone(),
            column_names,
            source: self.source.clone(),
        }
    }

    /// Writes the matrix as CSV: a header row of column names, then one row
    /// per instance. Values use the shortest representation that parses back
    /// to the identical f64, so a write/read round trip is exact.
    pub fn write_csv<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        writeln!(writer, "{}", self.column_names.join(","))?;
        let mut line = String::new();
        for i in 0..self.rows() {
            line.clear();
            for j in 0..self.cols() {
                if j > 0 {
                    line.push(',');
                }
                line.push_str(&format!("{}", self.values[(i, j)]));
            }
            writeln!(writer, "{line}")?;
        }
        Ok(())
    }

    /// Reads a matrix previously written by [`FeatureMatrix::write_csv`].
    /// Every row receives `label`; the source tag is taken as given.
    pub fn read_csv<R: BufRead>(
        reader: R,
        label: &str,
        source: SourceTag,
    ) -> Result<Self, IngestError> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or(IngestError::EmptyInput)?
            .map_err(IngestError::from)?;
        let column_names: Vec<String> = header.split(',').map(str::to_string).collect();
        let cols = column_names.len();
        let mut data: Vec<f64> = Vec::new();
        let mut rows = 0;
        for (line_no, line) in lines.enumerate() {
            let line = line.map_err(IngestError::from)?;
            if line.is_empty() {
                continue;
            }
            let mut count = 0;
            for field in line.split(',') {
                let value: f64 = field.parse().map_err(|_| IngestError::MalformedLine {
                    line_no: line_no + 2,
                    reason: format!("invalid numeric value {field:?}"),
                })?;
                data.push(value);
                count += 1;
            }
            if count != cols {
                return Err(IngestError::MalformedLine {
                    line_no: line_no + 2,
                    reason: format!("expected {cols} fields, found {count}"),
                });
            }
            rows += 1;
        }
        let values = DMatrix::from_row_slice(rows, cols, &data);
        let labels = vec![label.to_string(); rows];
        FeatureMatrix::new(values, labels, column_names, source)
    }
}

fn find_non_finite(values: &DMatrix<f64>) -> Option<(usize, usize)> {
    for j in 0..values.ncols() {
        for i in 0..values.nrows() {
            if !values[(i, j)].is_finite() {
                return Some((i, j));
            }
        }
    }
    None
}
