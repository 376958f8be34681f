//! Ex-ante accuracy measures and the accuracy-measures matrix.
//!
//! Rows of the matrix are ordered measure-major, then characteristic, then
//! generator: row index `(m * C + c) * G + g`. Columns follow the strategy
//! order of the run.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WaspError};
use crate::matrix::{LabeledMatrix, RowLabel};
use crate::stats;

/// Root mean squared error.
pub fn rmse(errors: &[f64]) -> Result<f64> {
    check_errors(errors)?;
    let squares: Vec<f64> = errors.iter().map(|e| e * e).collect();
    Ok((stats::order_free_sum(&squares) / errors.len() as f64).sqrt())
}

/// Quantile of absolute prediction error: the inf-type empirical
/// p-quantile of `|errors|`, i.e. order statistic `ceil(p * B)`.
pub fn qape(errors: &[f64], p: f64) -> Result<f64> {
    check_errors(errors)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(WaspError::Domain(format!("QAPE order must lie in (0, 1), got {p}")));
    }
    let abs: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
    Ok(stats::inf_quantile_sorted(&stats::sorted(&abs), p))
}

fn check_errors(errors: &[f64]) -> Result<()> {
    if errors.is_empty() {
        return Err(WaspError::Domain("accuracy measure of an empty error vector".into()));
    }
    if errors.iter().any(|e| !e.is_finite()) {
        return Err(WaspError::Domain("prediction errors must be finite".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureSpec {
    Rmse,
    Qape { p: f64 },
}

impl MeasureSpec {
    pub fn label(&self) -> String {
        match self {
            MeasureSpec::Rmse => "rmse".into(),
            MeasureSpec::Qape { p } => format!("qape_{p}"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            MeasureSpec::Qape { p } if !(p > 0.0 && p < 1.0) => Err(WaspError::Config(format!(
                "QAPE order must lie in (0, 1), got {p}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn evaluate(&self, errors: &[f64]) -> Result<f64> {
        match *self {
            MeasureSpec::Rmse => rmse(errors),
            MeasureSpec::Qape { p } => qape(errors, p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorDims {
    pub generators: usize,
    pub iterations: usize,
    pub characteristics: usize,
    pub strategies: usize,
}

/// Simulated prediction errors `U = predicted - true`, indexed by
/// (generator, iteration, characteristic, strategy), with a mask of
/// (generator, iteration, strategy) cells where the strategy failed to fit.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTensor {
    dims: TensorDims,
    values: Vec<f64>,
    failed: Vec<bool>,
}

/// Errors of one (generator, iteration) cell: `errors[c * P + p]`, and one
/// failure flag per strategy. Failed strategies hold NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct CellErrors {
    pub errors: Vec<f64>,
    pub failed: Vec<bool>,
}

impl ErrorTensor {
    pub fn new(dims: TensorDims) -> Self {
        let TensorDims {
            generators: g,
            iterations: b,
            characteristics: c,
            strategies: p,
        } = dims;
        ErrorTensor {
            dims,
            values: vec![f64::NAN; g * b * c * p],
            failed: vec![true; g * b * p],
        }
    }

    /// Assembles a tensor from cells listed generator-major
    /// (`cells[g * B + b]`).
    pub fn from_cells(dims: TensorDims, cells: Vec<CellErrors>) -> Result<Self> {
        let expected = dims.generators * dims.iterations;
        if cells.len() != expected {
            return Err(WaspError::Shape {
                expected,
                actual: cells.len(),
            });
        }
        let mut tensor = ErrorTensor::new(dims);
        for (i, cell) in cells.into_iter().enumerate() {
            tensor.set_cell(i / dims.iterations, i % dims.iterations, cell)?;
        }
        Ok(tensor)
    }

    pub fn dims(&self) -> TensorDims {
        self.dims
    }

    pub fn set_cell(&mut self, g: usize, b: usize, cell: CellErrors) -> Result<()> {
        let TensorDims {
            characteristics: c_n,
            strategies: p_n,
            ..
        } = self.dims;
        if cell.errors.len() != c_n * p_n {
            return Err(WaspError::Shape {
                expected: c_n * p_n,
                actual: cell.errors.len(),
            });
        }
        if cell.failed.len() != p_n {
            return Err(WaspError::Shape {
                expected: p_n,
                actual: cell.failed.len(),
            });
        }
        for p in 0..p_n {
            let ok = !cell.failed[p];
            if ok && (0..c_n).any(|c| !cell.errors[c * p_n + p].is_finite()) {
                return Err(WaspError::Domain(format!(
                    "non-finite error for unmasked cell (g={g}, b={b}, p={p})"
                )));
            }
            self.failed[(g * self.dims.iterations + b) * p_n + p] = !ok;
        }
        let start = (g * self.dims.iterations + b) * c_n * p_n;
        self.values[start..start + c_n * p_n].copy_from_slice(&cell.errors);
        Ok(())
    }

    pub fn get(&self, g: usize, b: usize, c: usize, p: usize) -> f64 {
        let d = self.dims;
        self.values[((g * d.iterations + b) * d.characteristics + c) * d.strategies + p]
    }

    pub fn is_failed(&self, g: usize, b: usize, p: usize) -> bool {
        self.failed[(g * self.dims.iterations + b) * self.dims.strategies + p]
    }

    pub fn failure_count(&self) -> usize {
        self.failed.iter().filter(|&&f| f).count()
    }

    /// Share of masked (generator, iteration, strategy) cells.
    pub fn failure_rate(&self) -> f64 {
        if self.failed.is_empty() {
            0.0
        } else {
            self.failure_count() as f64 / self.failed.len() as f64
        }
    }

    /// Errors of strategy `p` for characteristic `c` under generator `g`,
    /// over the iterations where the strategy did not fail.
    pub fn slice(&self, g: usize, c: usize, p: usize) -> Vec<f64> {
        (0..self.dims.iterations)
            .filter(|&b| !self.is_failed(g, b, p))
            .map(|b| self.get(g, b, c, p))
            .collect()
    }

    pub fn effective_iterations(&self, g: usize, p: usize) -> usize {
        (0..self.dims.iterations)
            .filter(|&b| !self.is_failed(g, b, p))
            .count()
    }
}

/// Names used to label the axes of an accuracy matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisNames {
    pub generators: Vec<String>,
    pub characteristics: Vec<String>,
    pub strategies: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveIterations {
    pub generator: String,
    pub strategy: String,
    pub iterations: usize,
}

/// The S x P accuracy-measures matrix, S = G * C * M.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyMatrix {
    pub values: LabeledMatrix,
    pub effective_iterations: Vec<EffectiveIterations>,
}

impl AccuracyMatrix {
    /// Wraps externally supplied values; entries must be finite and
    /// nonnegative.
    pub fn from_values(values: LabeledMatrix) -> Result<Self> {
        if let Some(i) = values.data().iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            let (r, c) = (i / values.ncols(), i % values.ncols());
            return Err(WaspError::Domain(format!(
                "accuracy matrix entry ({}, {}) = {} is not a nonnegative finite number",
                r + 1,
                c + 1,
                values.data()[i]
            )));
        }
        Ok(AccuracyMatrix {
            values,
            effective_iterations: Vec::new(),
        })
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }
}

pub fn build_accuracy_matrix(
    tensor: &ErrorTensor,
    measures: &[MeasureSpec],
    names: &AxisNames,
) -> Result<AccuracyMatrix> {
    let d = tensor.dims();
    if names.generators.len() != d.generators
        || names.characteristics.len() != d.characteristics
        || names.strategies.len() != d.strategies
    {
        return Err(WaspError::Config("axis names do not match tensor dimensions".into()));
    }
    if measures.is_empty() {
        return Err(WaspError::Config("at least one accuracy measure is required".into()));
    }

    let mut effective = Vec::with_capacity(d.generators * d.strategies);
    for g in 0..d.generators {
        for p in 0..d.strategies {
            let count = tensor.effective_iterations(g, p);
            if count < 2 {
                return Err(WaspError::Assembly {
                    generator: names.generators[g].clone(),
                    strategy: names.strategies[p].clone(),
                    effective: count,
                });
            }
            effective.push(EffectiveIterations {
                generator: names.generators[g].clone(),
                strategy: names.strategies[p].clone(),
                iterations: count,
            });
        }
    }

    let mut data = Vec::with_capacity(measures.len() * d.characteristics * d.generators * d.strategies);
    let mut labels = Vec::new();
    for m in measures {
        for c in 0..d.characteristics {
            for g in 0..d.generators {
                labels.push(RowLabel::new(
                    &names.generators[g],
                    &names.characteristics[c],
                    &m.label(),
                ));
                for p in 0..d.strategies {
                    data.push(m.evaluate(&tensor.slice(g, c, p))?);
                }
            }
        }
    }
    Ok(AccuracyMatrix {
        values: LabeledMatrix::new(data, labels, names.strategies.clone())?,
        effective_iterations: effective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!((rmse(&[3.0, -4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        assert!((rmse(&[-2.5; 7]).unwrap() - 2.5).abs() < 1e-15);
        assert!(rmse(&[]).is_err());
    }

    /// Smallest candidate x with share(|e| <= x) >= p.
    fn qape_brute_force(errors: &[f64], p: f64) -> f64 {
        let abs: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
        let mut best = f64::INFINITY;
        for &x in &abs {
            let share = abs.iter().filter(|&&a| a <= x).count() as f64 / abs.len() as f64;
            if share >= p && x < best {
                best = x;
            }
        }
        best
    }

    #[test]
    fn qape_examples() {
        assert_eq!(qape(&[1.0, -2.0, 3.0, -4.0, 5.0], 0.5).unwrap(), 3.0);
        assert_eq!(qape_brute_force(&[1.0, -2.0, 3.0, -4.0, 5.0], 0.5), 3.0);
        assert_eq!(qape(&[-7.0], 0.5).unwrap(), 7.0);
        let hundred: Vec<f64> = (1..=100).map(|i| -f64::from(i)).collect();
        assert_eq!(qape(&hundred, 0.95).unwrap(), 95.0);
        assert!(qape(&[], 0.5).is_err());
        assert!(qape(&[1.0], 1.0).is_err());
    }

    #[test]
    fn qape_agrees_with_brute_force_on_grid() {
        let errors = [0.3, -1.2, 4.4, 0.0, -0.3, 2.2, 9.1, -5.5, 1.0, 3.3, -2.0];
        for i in 1..100 {
            let p = i as f64 / 100.0;
            assert_eq!(qape(&errors, p).unwrap(), qape_brute_force(&errors, p), "p = {p}");
        }
    }

    fn names(g: usize, c: usize, p: usize) -> AxisNames {
        AxisNames {
            generators: (1..=g).map(|i| format!("M{i}")).collect(),
            characteristics: (1..=c).map(|i| format!("theta{i}")).collect(),
            strategies: (1..=p).map(|i| format!("s{i}")).collect(),
        }
    }

    #[test]
    fn single_row_matrix() {
        let dims = TensorDims {
            generators: 1,
            iterations: 3,
            characteristics: 1,
            strategies: 2,
        };
        let cells = vec![
            CellErrors { errors: vec![1.0, 0.0], failed: vec![false; 2] },
            CellErrors { errors: vec![1.0, 0.0], failed: vec![false; 2] },
            CellErrors { errors: vec![1.0, 3.0], failed: vec![false; 2] },
        ];
        let tensor = ErrorTensor::from_cells(dims, cells).unwrap();
        let a = build_accuracy_matrix(&tensor, &[MeasureSpec::Rmse], &names(1, 1, 2)).unwrap();
        assert_eq!(a.nrows(), 1);
        assert_eq!(a.values.get(0, 0), 1.0);
        assert!((a.values.get(0, 1) - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn row_count_and_order() {
        let dims = TensorDims {
            generators: 2,
            iterations: 2,
            characteristics: 2,
            strategies: 2,
        };
        let cells = (0..4)
            .map(|i| CellErrors {
                errors: vec![i as f64 + 1.0; 4],
                failed: vec![false; 2],
            })
            .collect();
        let tensor = ErrorTensor::from_cells(dims, cells).unwrap();
        let measures = [
            MeasureSpec::Rmse,
            MeasureSpec::Qape { p: 0.5 },
            MeasureSpec::Qape { p: 0.95 },
        ];
        let a = build_accuracy_matrix(&tensor, &measures, &names(2, 2, 2)).unwrap();
        assert_eq!(a.nrows(), 12);
        let labels = a.values.row_labels();
        assert_eq!(labels[0], RowLabel::new("M1", "theta1", "rmse"));
        assert_eq!(labels[1], RowLabel::new("M2", "theta1", "rmse"));
        assert_eq!(labels[2], RowLabel::new("M1", "theta2", "rmse"));
        assert_eq!(labels[4], RowLabel::new("M1", "theta1", "qape_0.5"));
        assert_eq!(labels[11], RowLabel::new("M2", "theta2", "qape_0.95"));
    }

    #[test]
    fn masked_iterations_are_dropped() {
        let dims = TensorDims {
            generators: 1,
            iterations: 3,
            characteristics: 1,
            strategies: 2,
        };
        let cells = vec![
            CellErrors { errors: vec![1.0, f64::NAN], failed: vec![false, true] },
            CellErrors { errors: vec![1.0, 2.0], failed: vec![false; 2] },
            CellErrors { errors: vec![1.0, 2.0], failed: vec![false; 2] },
        ];
        let tensor = ErrorTensor::from_cells(dims, cells).unwrap();
        assert!((tensor.failure_rate() - 1.0 / 6.0).abs() < 1e-15);
        let a = build_accuracy_matrix(&tensor, &[MeasureSpec::Rmse], &names(1, 1, 2)).unwrap();
        assert_eq!(a.values.get(0, 1), 2.0);
        assert_eq!(a.effective_iterations[1].iterations, 2);
    }

    #[test]
    fn starved_cell_is_an_assembly_error() {
        let dims = TensorDims {
            generators: 1,
            iterations: 2,
            characteristics: 1,
            strategies: 2,
        };
        let cells = vec![
            CellErrors { errors: vec![1.0, f64::NAN], failed: vec![false, true] },
            CellErrors { errors: vec![1.0, f64::NAN], failed: vec![false, true] },
        ];
        let tensor = ErrorTensor::from_cells(dims, cells).unwrap();
        let err = build_accuracy_matrix(&tensor, &[MeasureSpec::Rmse], &names(1, 1, 2)).unwrap_err();
        assert!(
            matches!(err, WaspError::Assembly { ref generator, ref strategy, effective: 0 }
                if generator == "M1" && strategy == "s2"),
            "{err}"
        );
    }

    #[test]
    fn unmasked_nan_rejected() {
        let mut tensor = ErrorTensor::new(TensorDims {
            generators: 1,
            iterations: 1,
            characteristics: 1,
            strategies: 1,
        });
        let cell = CellErrors {
            errors: vec![f64::NAN],
            failed: vec![false],
        };
        assert!(tensor.set_cell(0, 0, cell).is_err());
    }

    #[test]
    fn external_matrix_validated() {
        let lm = LabeledMatrix::new(
            vec![1.0, -2.0],
            vec![RowLabel::new("g", "c", "m")],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        assert!(matches!(AccuracyMatrix::from_values(lm), Err(WaspError::Domain(_))));
    }
}
