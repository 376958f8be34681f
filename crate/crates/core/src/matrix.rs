//! Row- and column-labelled dense matrices with a CSV form.
//!
//! CSV layout: header `generator,characteristic,measure,<strategy...>`, then
//! one line per row. Numbers are written in shortest round-trip form, so a
//! reload reproduces every value bit for bit.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, WaspError};

const LABEL_COLUMNS: [&str; 3] = ["generator", "characteristic", "measure"];

/// A voter: one (generator, characteristic, measure) scenario.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RowLabel {
    pub generator: String,
    pub characteristic: String,
    pub measure: String,
}

impl RowLabel {
    pub fn new(generator: &str, characteristic: &str, measure: &str) -> Self {
        RowLabel {
            generator: generator.into(),
            characteristic: characteristic.into(),
            measure: measure.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    row_labels: Vec<RowLabel>,
    col_labels: Vec<String>,
}

impl LabeledMatrix {
    /// `data` is row-major.
    pub fn new(data: Vec<f64>, row_labels: Vec<RowLabel>, col_labels: Vec<String>) -> Result<Self> {
        let (rows, cols) = (row_labels.len(), col_labels.len());
        if data.len() != rows * cols {
            return Err(WaspError::Shape {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(LabeledMatrix {
            rows,
            cols,
            data,
            row_labels,
            col_labels,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], row_labels: Vec<RowLabel>, col_labels: Vec<String>) -> Result<Self> {
        if let Some(bad) = rows.iter().find(|r| r.len() != col_labels.len()) {
            return Err(WaspError::Shape {
                expected: col_labels.len(),
                actual: bad.len(),
            });
        }
        Self::new(rows.concat(), row_labels, col_labels)
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row_labels(&self) -> &[RowLabel] {
        &self.row_labels
    }

    pub fn col_labels(&self) -> &[String] {
        &self.col_labels
    }

    /// Same labels, new row-major values.
    pub fn with_data(&self, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), self.data.len());
        LabeledMatrix {
            data,
            ..self.clone()
        }
    }

    pub fn write_csv_to<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let header: Vec<&str> = LABEL_COLUMNS
            .iter()
            .copied()
            .chain(self.col_labels.iter().map(String::as_str))
            .collect();
        out.write_record(&header)?;
        for r in 0..self.rows {
            let label = &self.row_labels[r];
            let mut record = vec![
                label.generator.clone(),
                label.characteristic.clone(),
                label.measure.clone(),
            ];
            record.extend(self.row(r).iter().map(|v| v.to_string()));
            out.write_record(&record)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        self.write_csv_to(std::fs::File::create(path)?)
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv_to(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("CSV output is UTF-8")
    }

    pub fn read_csv_from<R: Read>(reader: R) -> Result<Self> {
        let mut input = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header: Vec<String> = input.headers()?.iter().map(|h| h.trim().to_string()).collect();
        if header.len() < LABEL_COLUMNS.len() || header[..3] != LABEL_COLUMNS {
            return Err(WaspError::Schema(format!(
                "matrix header must start with {}",
                LABEL_COLUMNS.join(",")
            )));
        }
        let col_labels = header[3..].to_vec();
        if col_labels.is_empty() {
            return Err(WaspError::Schema("matrix has no strategy columns".into()));
        }
        let mut row_labels = Vec::new();
        let mut data = Vec::new();
        for (i, record) in input.records().enumerate() {
            let record = record?;
            if record.len() != header.len() {
                return Err(WaspError::Parse {
                    row: i + 1,
                    column: String::new(),
                    message: format!("expected {} fields, found {}", header.len(), record.len()),
                });
            }
            row_labels.push(RowLabel::new(record[0].trim(), record[1].trim(), record[2].trim()));
            for (j, cell) in record.iter().enumerate().skip(3) {
                let value: f64 = cell.trim().parse().map_err(|_| WaspError::Parse {
                    row: i + 1,
                    column: header[j].clone(),
                    message: format!("`{cell}` is not a number"),
                })?;
                data.push(value);
            }
        }
        if row_labels.is_empty() {
            return Err(WaspError::Schema("matrix has no rows".into()));
        }
        Self::new(data, row_labels, col_labels)
    }

    pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::read_csv_from(std::fs::File::open(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let m = LabeledMatrix::new(
            vec![0.1 + 0.2, 1e-300, 333175.0, 2.0 / 3.0],
            vec![RowLabel::new("g1", "total", "rmse"), RowLabel::new("g2", "total", "qape_0.5")],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let text = m.to_csv_string();
        let back = LabeledMatrix::read_csv_from(text.as_bytes()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn header_checked() {
        let err = LabeledMatrix::read_csv_from("voter,a,b\nx,1,2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, WaspError::Schema(_)));
    }

    #[test]
    fn non_numeric_cell() {
        let text = "generator,characteristic,measure,a\ng,c,m,oops\n";
        let err = LabeledMatrix::read_csv_from(text.as_bytes()).unwrap_err();
        assert!(matches!(err, WaspError::Parse { row: 1, .. }));
    }
}
