//! Tabular input: CSV loading, reference coding of categorical covariates,
//! and the synthetic motor-portfolio generator.
//!
//! A [`StudyFrame`] is the fixed part of every experiment: the covariates of
//! the `n` sampled units with their observed response, and the covariates of
//! the `k` units whose response is still unknown.

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, WaspError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Covariate {
    pub name: String,
    pub kind: CovariateKind,
}

impl Covariate {
    pub fn numeric(name: &str) -> Self {
        Covariate {
            name: name.to_string(),
            kind: CovariateKind::Numeric,
        }
    }

    pub fn categorical(name: &str) -> Self {
        Covariate {
            name: name.to_string(),
            kind: CovariateKind::Categorical,
        }
    }
}

/// Names the columns of an input table and their roles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub response: String,
    pub covariates: Vec<Covariate>,
    /// Binary column: true for sampled rows, false for out-of-sample rows.
    pub sample_flag: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit_id: Option<String>,
}

/// Design matrices for sampled and out-of-sample units plus the observed
/// sample response. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyFrame {
    x_sample: DMatrix<f64>,
    y_sample: Vec<f64>,
    x_out: DMatrix<f64>,
    column_names: Vec<String>,
    unit_ids: Option<Vec<String>>,
}

impl StudyFrame {
    pub fn new(
        x_sample: DMatrix<f64>,
        y_sample: Vec<f64>,
        x_out: DMatrix<f64>,
        column_names: Vec<String>,
    ) -> Result<Self> {
        if x_sample.nrows() == 0 {
            return Err(WaspError::Schema("the sample part has no rows".into()));
        }
        if x_out.nrows() == 0 {
            return Err(WaspError::Schema("the out-of-sample part has no rows".into()));
        }
        if x_sample.ncols() != x_out.ncols() {
            return Err(WaspError::Shape {
                expected: x_sample.ncols(),
                actual: x_out.ncols(),
            });
        }
        if column_names.len() != x_sample.ncols() {
            return Err(WaspError::Shape {
                expected: x_sample.ncols(),
                actual: column_names.len(),
            });
        }
        if y_sample.len() != x_sample.nrows() {
            return Err(WaspError::Shape {
                expected: x_sample.nrows(),
                actual: y_sample.len(),
            });
        }
        if let Some(i) = y_sample.iter().position(|v| !v.is_finite()) {
            return Err(WaspError::Domain(format!(
                "sample response at row {i} is not finite"
            )));
        }
        if x_sample.iter().chain(x_out.iter()).any(|v| !v.is_finite()) {
            return Err(WaspError::Domain("covariates must be finite".into()));
        }
        Ok(StudyFrame {
            x_sample,
            y_sample,
            x_out,
            column_names,
            unit_ids: None,
        })
    }

    pub fn with_unit_ids(mut self, ids: Vec<String>) -> Result<Self> {
        let expected = self.n() + self.k();
        if ids.len() != expected {
            return Err(WaspError::Shape {
                expected,
                actual: ids.len(),
            });
        }
        self.unit_ids = Some(ids);
        Ok(self)
    }

    pub fn x_sample(&self) -> &DMatrix<f64> {
        &self.x_sample
    }

    pub fn y_sample(&self) -> &[f64] {
        &self.y_sample
    }

    pub fn x_out(&self) -> &DMatrix<f64> {
        &self.x_out
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn unit_ids(&self) -> Option<&[String]> {
        self.unit_ids.as_deref()
    }

    /// Sample size.
    pub fn n(&self) -> usize {
        self.x_sample.nrows()
    }

    /// Number of out-of-sample units.
    pub fn k(&self) -> usize {
        self.x_out.nrows()
    }

    /// Number of encoded covariate columns.
    pub fn q(&self) -> usize {
        self.x_sample.ncols()
    }

    /// Stacks the sample rows on top of the out-of-sample rows.
    pub fn x_full(&self) -> DMatrix<f64> {
        let (n, k, q) = (self.n(), self.k(), self.q());
        DMatrix::from_fn(n + k, q, |i, j| {
            if i < n {
                self.x_sample[(i, j)]
            } else {
                self.x_out[(i - n, j)]
            }
        })
    }

    /// Writes the encoded frame as CSV and returns the all-numeric schema
    /// that reloads it.
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<ColumnSchema> {
        let response = unique_name("response", &self.column_names);
        let flag = unique_name("in_sample", &self.column_names);
        let mut writer = csv::Writer::from_path(path)?;
        let mut header: Vec<&str> = self.column_names.iter().map(String::as_str).collect();
        header.push(&response);
        header.push(&flag);
        writer.write_record(&header)?;
        for i in 0..self.n() {
            let mut record: Vec<String> =
                self.x_sample.row(i).iter().map(|v| v.to_string()).collect();
            record.push(self.y_sample[i].to_string());
            record.push("1".into());
            writer.write_record(&record)?;
        }
        for i in 0..self.k() {
            let mut record: Vec<String> = self.x_out.row(i).iter().map(|v| v.to_string()).collect();
            record.push(String::new());
            record.push("0".into());
            writer.write_record(&record)?;
        }
        writer.flush()?;
        Ok(ColumnSchema {
            response,
            covariates: self.column_names.iter().map(|c| Covariate::numeric(c)).collect(),
            sample_flag: flag,
            unit_id: None,
        })
    }
}

fn unique_name(base: &str, taken: &[String]) -> String {
    let mut name = base.to_string();
    while taken.iter().any(|t| *t == name) {
        name.push('_');
    }
    name
}

/// Untyped table as read from disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<Self> {
        let reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
        Self::from_reader(reader)
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        Self::from_reader(reader)
    }

    fn from_reader<R: std::io::Read>(mut reader: csv::Reader<R>) -> Result<Self> {
        let headers = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let mut rows = Vec::new();
        for record in reader.records() {
            rows.push(record?.iter().map(|c| c.trim().to_string()).collect());
        }
        Ok(RawTable { headers, rows })
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(&self.headers)?;
        for row in &self.rows {
            writer.write_record(row)?;
        }
        writer.flush()?;
        Ok(())
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| WaspError::Schema(format!("column `{name}` not found in header")))
    }
}

pub fn load_csv<P: AsRef<Path>>(path: P, schema: &ColumnSchema) -> Result<StudyFrame> {
    let table = RawTable::read_csv(path)?;
    encode(&table, schema)
}

fn parse_flag(cell: &str, row: usize, column: &str) -> Result<bool> {
    match cell.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" => Ok(true),
        "0" | "false" | "no" => Ok(false),
        other => Err(WaspError::Parse {
            row,
            column: column.to_string(),
            message: format!("`{other}` is not a binary flag"),
        }),
    }
}

fn parse_number(cell: &str, row: usize, column: &str) -> Result<f64> {
    let value: f64 = cell.parse().map_err(|_| WaspError::Parse {
        row,
        column: column.to_string(),
        message: format!("`{cell}` is not a number"),
    })?;
    if !value.is_finite() {
        return Err(WaspError::Parse {
            row,
            column: column.to_string(),
            message: format!("`{cell}` is not finite"),
        });
    }
    Ok(value)
}

/// Encodes a raw table into a [`StudyFrame`].
///
/// Categorical covariates are reference coded: levels are sorted, the first
/// is dropped and each remaining level becomes a `name=level` indicator
/// column. Row numbers in errors are 1-based data rows (header excluded).
pub fn encode(table: &RawTable, schema: &ColumnSchema) -> Result<StudyFrame> {
    let response_col = table.column(&schema.response)?;
    let flag_col = table.column(&schema.sample_flag)?;
    let covariate_cols = schema
        .covariates
        .iter()
        .map(|c| table.column(&c.name))
        .collect::<Result<Vec<_>>>()?;
    let id_col = schema.unit_id.as_deref().map(|id| table.column(id)).transpose()?;

    for (r, row) in table.rows.iter().enumerate() {
        if row.len() != table.headers.len() {
            return Err(WaspError::Parse {
                row: r + 1,
                column: String::new(),
                message: format!(
                    "expected {} fields, found {}",
                    table.headers.len(),
                    row.len()
                ),
            });
        }
    }

    let mut in_sample = Vec::with_capacity(table.rows.len());
    for (r, row) in table.rows.iter().enumerate() {
        in_sample.push(parse_flag(&row[flag_col], r + 1, &schema.sample_flag)?);
    }

    let mut y_sample = Vec::new();
    let mut ignored = 0usize;
    for (r, row) in table.rows.iter().enumerate() {
        let cell = &row[response_col];
        if in_sample[r] {
            y_sample.push(parse_number(cell, r + 1, &schema.response)?);
        } else if !cell.is_empty() {
            ignored += 1;
        }
    }
    if ignored > 0 {
        log::warn!(
            "ignoring {ignored} response value(s) on out-of-sample rows of `{}`",
            schema.response
        );
    }

    // One column block per covariate, in schema order.
    let mut names = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for (cov, &col) in schema.covariates.iter().zip(&covariate_cols) {
        match cov.kind {
            CovariateKind::Numeric => {
                let mut values = Vec::with_capacity(table.rows.len());
                for (r, row) in table.rows.iter().enumerate() {
                    values.push(parse_number(&row[col], r + 1, &cov.name)?);
                }
                names.push(cov.name.clone());
                columns.push(values);
            }
            CovariateKind::Categorical => {
                let levels: BTreeSet<&str> = table
                    .rows
                    .iter()
                    .zip(&in_sample)
                    .filter(|(_, &s)| s)
                    .map(|(row, _)| row[col].as_str())
                    .collect();
                if levels.len() < 2 {
                    return Err(WaspError::Schema(format!(
                        "categorical covariate `{}` needs at least 2 levels in the sample, found {}",
                        cov.name,
                        levels.len()
                    )));
                }
                for (row, &s) in table.rows.iter().zip(&in_sample) {
                    if !s && !levels.contains(row[col].as_str()) {
                        return Err(WaspError::Encoding {
                            column: cov.name.clone(),
                            level: row[col].clone(),
                        });
                    }
                }
                for level in levels.iter().skip(1) {
                    names.push(format!("{}={}", cov.name, level));
                    columns.push(
                        table
                            .rows
                            .iter()
                            .map(|row| if row[col] == *level { 1.0 } else { 0.0 })
                            .collect(),
                    );
                }
            }
        }
    }

    let sample_rows: Vec<usize> = (0..table.rows.len()).filter(|&r| in_sample[r]).collect();
    let out_rows: Vec<usize> = (0..table.rows.len()).filter(|&r| !in_sample[r]).collect();
    let q = columns.len();
    let x_sample = DMatrix::from_fn(sample_rows.len(), q, |i, j| columns[j][sample_rows[i]]);
    let x_out = DMatrix::from_fn(out_rows.len(), q, |i, j| columns[j][out_rows[i]]);

    let frame = StudyFrame::new(x_sample, y_sample, x_out, names)?;
    match id_col {
        Some(col) => {
            let ids = sample_rows
                .iter()
                .chain(&out_rows)
                .map(|&r| table.rows[r][col].clone())
                .collect();
            frame.with_unit_ids(ids)
        }
        None => Ok(frame),
    }
}

/// One risk factor of the synthetic portfolio: levels, their sampling
/// probabilities and additive effects on the log scale.
#[derive(Debug, Clone, Copy)]
pub struct PortfolioFactor {
    pub name: &'static str,
    pub levels: &'static [&'static str],
    pub probabilities: &'static [f64],
    pub log_effects: &'static [f64],
}

pub const PORTFOLIO_FACTORS: [PortfolioFactor; 5] = [
    PortfolioFactor {
        name: "Gender",
        levels: &["0", "1"],
        probabilities: &[0.55, 0.45],
        log_effects: &[0.0, 0.05],
    },
    PortfolioFactor {
        name: "Kind_of_distr",
        levels: &["country", "suburban", "urban"],
        probabilities: &[0.3, 0.3, 0.4],
        log_effects: &[0.0, 0.1, 0.25],
    },
    PortfolioFactor {
        name: "Kind_of_payment",
        levels: &["cash", "transfer"],
        probabilities: &[0.4, 0.6],
        log_effects: &[0.0, -0.03],
    },
    PortfolioFactor {
        name: "Engine",
        levels: &["BEN", "DIE"],
        probabilities: &[0.6, 0.4],
        log_effects: &[0.0, 0.15],
    },
    PortfolioFactor {
        name: "Age_group",
        levels: &["1", "2", "3"],
        probabilities: &[0.3, 0.4, 0.3],
        log_effects: &[0.0, 0.05, 0.1],
    },
];

pub const PORTFOLIO_LOG_INTERCEPT: f64 = 7.6;
pub const PORTFOLIO_LOG_SD: f64 = 0.9;
pub const PORTFOLIO_RESPONSE: &str = "Claim_Amount";
pub const PORTFOLIO_FLAG: &str = "in_sample";

pub fn portfolio_schema() -> ColumnSchema {
    ColumnSchema {
        response: PORTFOLIO_RESPONSE.into(),
        covariates: PORTFOLIO_FACTORS
            .iter()
            .map(|f| Covariate::categorical(f.name))
            .collect(),
        sample_flag: PORTFOLIO_FLAG.into(),
        unit_id: None,
    }
}

/// Raw synthetic portfolio: `n` sampled policies with a claim amount and
/// `k` policies with an empty claim cell.
///
/// Claims follow `log y = 7.6 + sum of factor effects + N(0, 0.9^2)`. The
/// first rows cycle through every level so each factor is observed at all
/// its levels in the sample.
pub fn synthesize_portfolio_table(n: usize, k: usize, seed: u64) -> Result<RawTable> {
    if n < 10 {
        return Err(WaspError::Config(format!("portfolio needs n >= 10, got {n}")));
    }
    if k < 1 {
        return Err(WaspError::Config("portfolio needs k >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut headers: Vec<String> = PORTFOLIO_FACTORS.iter().map(|f| f.name.to_string()).collect();
    headers.push(PORTFOLIO_RESPONSE.into());
    headers.push(PORTFOLIO_FLAG.into());

    let mut rows = Vec::with_capacity(n + k);
    for i in 0..n + k {
        let mut row = Vec::with_capacity(headers.len());
        let mut eta = PORTFOLIO_LOG_INTERCEPT;
        for factor in &PORTFOLIO_FACTORS {
            let level = if i < 3 {
                i % factor.levels.len()
            } else {
                draw_level(&mut rng, factor.probabilities)
            };
            eta += factor.log_effects[level];
            row.push(factor.levels[level].to_string());
        }
        let noise: f64 = StandardNormal.sample(&mut rng);
        if i < n {
            row.push((eta + PORTFOLIO_LOG_SD * noise).exp().to_string());
            row.push("1".into());
        } else {
            row.push(String::new());
            row.push("0".into());
        }
        rows.push(row);
    }
    Ok(RawTable { headers, rows })
}

fn draw_level<R: Rng>(rng: &mut R, probabilities: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probabilities.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probabilities.len() - 1
}

pub fn synthesize_portfolio(n: usize, k: usize, seed: u64) -> Result<StudyFrame> {
    encode(&synthesize_portfolio_table(n, k, seed)?, &portfolio_schema())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_schema() -> ColumnSchema {
        ColumnSchema {
            response: "claim".into(),
            covariates: vec![Covariate::categorical("gender")],
            sample_flag: "insample".into(),
            unit_id: None,
        }
    }

    #[test]
    fn smallest_valid_frame() {
        let csv = "claim,gender,insample\n1.5,F,1\n2.5,M,1\n3.0,F,1\n,M,0\n9,F,0\n";
        let frame = encode(&RawTable::from_csv_str(csv).unwrap(), &tiny_schema()).unwrap();
        assert_eq!((frame.n(), frame.k(), frame.q()), (3, 2, 1));
        assert_eq!(frame.column_names(), &["gender=M".to_string()]);
        assert_eq!(frame.y_sample(), &[1.5, 2.5, 3.0]);
        assert_eq!(frame.x_out()[(0, 0)], 1.0);
        assert_eq!(frame.x_out()[(1, 0)], 0.0);
    }

    #[test]
    fn missing_column_is_schema_error() {
        let csv = "claim,gender,insample\n1,F,1\n2,M,1\n3,M,0\n";
        let mut schema = tiny_schema();
        schema.covariates.push(Covariate::numeric("age"));
        let err = encode(&RawTable::from_csv_str(csv).unwrap(), &schema).unwrap_err();
        assert!(matches!(err, WaspError::Schema(ref m) if m.contains("age")), "{err}");
    }

    #[test]
    fn bad_response_cell_reports_row() {
        let csv = "claim,gender,insample\n1,F,1\nabc,M,1\n3,M,0\n";
        let err = encode(&RawTable::from_csv_str(csv).unwrap(), &tiny_schema()).unwrap_err();
        assert!(matches!(err, WaspError::Parse { row: 2, .. }), "{err}");
    }

    #[test]
    fn unseen_out_of_sample_level() {
        let csv = "claim,gender,insample\n1,F,1\n2,M,1\n3,X,0\n";
        let err = encode(&RawTable::from_csv_str(csv).unwrap(), &tiny_schema()).unwrap_err();
        assert!(matches!(err, WaspError::Encoding { ref level, .. } if level == "X"), "{err}");
    }

    #[test]
    fn single_level_categorical_rejected() {
        let csv = "claim,gender,insample\n1,F,1\n2,F,1\n3,M,0\n";
        let err = encode(&RawTable::from_csv_str(csv).unwrap(), &tiny_schema()).unwrap_err();
        assert!(matches!(err, WaspError::Schema(_)));
    }

    #[test]
    fn out_of_sample_response_is_ignored() {
        let csv = "claim,gender,insample\n1,F,1\n2,M,1\nnot-a-number,M,0\n";
        let frame = encode(&RawTable::from_csv_str(csv).unwrap(), &tiny_schema()).unwrap();
        assert_eq!(frame.k(), 1);
    }

    #[test]
    fn portfolio_encodes_to_seven_columns() {
        // 1 + 2 + 1 + 1 + 2 non-reference levels
        let frame = synthesize_portfolio(50, 5, 3).unwrap();
        assert_eq!(frame.q(), 7);
        assert_eq!(
            frame.column_names(),
            &[
                "Gender=1",
                "Kind_of_distr=suburban",
                "Kind_of_distr=urban",
                "Kind_of_payment=transfer",
                "Engine=DIE",
                "Age_group=2",
                "Age_group=3"
            ]
        );
    }

    #[test]
    fn portfolio_rejects_small_n() {
        assert!(synthesize_portfolio(9, 5, 1).is_err());
        assert!(synthesize_portfolio(10, 0, 1).is_err());
    }

    #[test]
    fn unit_ids_follow_sample_then_out_order() {
        let csv = "id,claim,gender,insample\na,1,F,1\nb,,M,0\nc,2,M,1\n";
        let mut schema = tiny_schema();
        schema.unit_id = Some("id".into());
        let frame = encode(&RawTable::from_csv_str(csv).unwrap(), &schema).unwrap();
        assert_eq!(frame.unit_ids().unwrap(), &["a", "c", "b"]);
    }
}
