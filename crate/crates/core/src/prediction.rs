//! Population characteristics and the PLUG-IN predictor.
//!
//! The PLUG-IN prediction of a characteristic evaluates it on the composite
//! vector formed by the observed sample responses followed by the model's
//! predictions for the out-of-sample units.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::StudyFrame;
use crate::error::{Result, WaspError};
use crate::stats;
use crate::zoo::{self, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CharacteristicKind {
    Total,
    Mean,
    /// Sample median, midpoint of the two central values for even lengths.
    Median,
    /// Inf-type order statistic `y_(ceil(p * N))`.
    Quantile {
        p: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Characteristic {
    pub name: String,
    #[serde(flatten)]
    pub kind: CharacteristicKind,
}

impl Characteristic {
    pub fn new(name: &str, kind: CharacteristicKind) -> Self {
        Characteristic {
            name: name.to_string(),
            kind,
        }
    }

    pub fn total() -> Self {
        Self::new("total", CharacteristicKind::Total)
    }

    pub fn mean() -> Self {
        Self::new("mean", CharacteristicKind::Mean)
    }

    pub fn median() -> Self {
        Self::new("median", CharacteristicKind::Median)
    }

    pub fn quantile(p: f64) -> Self {
        Self::new(&format!("quantile_{p}"), CharacteristicKind::Quantile { p })
    }

    pub fn validate(&self) -> Result<()> {
        if let CharacteristicKind::Quantile { p } = self.kind {
            if !(p > 0.0 && p < 1.0) {
                return Err(WaspError::Config(format!(
                    "characteristic `{}`: quantile order must lie in (0, 1), got {p}",
                    self.name
                )));
            }
        }
        Ok(())
    }

    /// Evaluates the characteristic; `y` must be nonempty.
    pub fn eval(&self, y: &[f64]) -> f64 {
        match self.kind {
            CharacteristicKind::Total => y.iter().sum(),
            CharacteristicKind::Mean => y.iter().sum::<f64>() / y.len() as f64,
            CharacteristicKind::Median => stats::median(y),
            CharacteristicKind::Quantile { p } => stats::inf_quantile_sorted(&stats::sorted(y), p),
        }
    }
}

/// Evaluates `c` on a population vector that must have `expected_len` entries.
pub fn eval_characteristic(c: &Characteristic, y: &[f64], expected_len: usize) -> Result<f64> {
    if y.len() != expected_len {
        return Err(WaspError::Shape {
            expected: expected_len,
            actual: y.len(),
        });
    }
    if y.is_empty() {
        return Err(WaspError::Domain("characteristic of an empty vector".into()));
    }
    Ok(c.eval(y))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[default]
    PlugIn,
}

/// A (predictive model, prediction algorithm) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionStrategy {
    pub name: String,
    pub model: ModelSpec,
    #[serde(default)]
    pub algorithm: Algorithm,
}

impl PredictionStrategy {
    pub fn plug_in(name: &str, model: ModelSpec) -> Self {
        PredictionStrategy {
            name: name.to_string(),
            model,
            algorithm: Algorithm::PlugIn,
        }
    }
}

/// PLUG-IN prediction from explicit sample and out-of-sample designs. `x_out`
/// may have zero rows, in which case every characteristic is computed on
/// `y_s` alone.
pub fn plug_in_from_parts(
    model: &ModelSpec,
    x_sample: &DMatrix<f64>,
    y_s: &[f64],
    x_out: &DMatrix<f64>,
    chars: &[Characteristic],
) -> Result<Vec<f64>> {
    if y_s.len() != x_sample.nrows() {
        return Err(WaspError::Shape {
            expected: x_sample.nrows(),
            actual: y_s.len(),
        });
    }
    let fitted = zoo::fit(model, x_sample, y_s)?;
    let mut composite = Vec::with_capacity(y_s.len() + x_out.nrows());
    composite.extend_from_slice(y_s);
    if x_out.nrows() > 0 {
        composite.extend(fitted.predict(x_out)?);
    }
    if let Some(i) = composite.iter().position(|v| !v.is_finite()) {
        return Err(WaspError::Domain(format!(
            "prediction for unit {i} is not finite"
        )));
    }
    let total_len = composite.len();
    chars
        .iter()
        .map(|c| eval_characteristic(c, &composite, total_len))
        .collect()
}

/// PLUG-IN prediction of every characteristic under `strategy`, using `y_s`
/// as the sample response. Fit failures carry the strategy name.
pub fn plug_in_predict(
    strategy: &PredictionStrategy,
    frame: &StudyFrame,
    y_s: &[f64],
    chars: &[Characteristic],
) -> Result<Vec<f64>> {
    match strategy.algorithm {
        Algorithm::PlugIn => {
            plug_in_from_parts(&strategy.model, frame.x_sample(), y_s, frame.x_out(), chars)
                .map_err(|e| WaspError::Strategy {
                    strategy: strategy.name.clone(),
                    source: Box::new(e),
                })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_characteristics() {
        let y = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(Characteristic::total().eval(&y), 10.0);
        assert_eq!(Characteristic::mean().eval(&y), 2.5);
        assert_eq!(Characteristic::median().eval(&y), 2.5);
    }

    #[test]
    fn quantile_is_inf_type() {
        let y: Vec<f64> = (1..=100).rev().map(f64::from).collect();
        assert_eq!(Characteristic::quantile(0.95).eval(&y), 95.0);
        assert_eq!(Characteristic::quantile(0.5).eval(&[3.0, 1.0, 2.0, 5.0, 4.0]), 3.0);
    }

    #[test]
    fn quantile_order_validated() {
        assert!(Characteristic::quantile(1.0).validate().is_err());
        assert!(Characteristic::quantile(0.0).validate().is_err());
        assert!(Characteristic::quantile(0.3).validate().is_ok());
    }

    #[test]
    fn length_mismatch() {
        let err = eval_characteristic(&Characteristic::total(), &[1.0, 2.0], 3).unwrap_err();
        assert!(matches!(err, WaspError::Shape { expected: 3, actual: 2 }));
    }

    #[test]
    fn empty_out_block_reduces_to_sample() {
        let x = DMatrix::from_column_slice(4, 1, &[1.0, 2.0, 3.0, 4.0]);
        let y = [3.0, 1.0, 4.0, 1.5];
        let chars = [
            Characteristic::total(),
            Characteristic::median(),
            Characteristic::quantile(0.75),
        ];
        let got = plug_in_from_parts(&ModelSpec::ols(), &x, &y, &DMatrix::zeros(0, 1), &chars)
            .unwrap();
        let direct: Vec<f64> = chars.iter().map(|c| c.eval(&y)).collect();
        assert_eq!(got, direct);
    }

    #[test]
    fn exact_linear_total() {
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let y = [3.0, 5.0, 7.0];
        let x_out = DMatrix::from_column_slice(2, 1, &[10.0, 20.0]);
        let got = plug_in_from_parts(&ModelSpec::ols(), &x, &y, &x_out, &[Characteristic::total()])
            .unwrap();
        // 15 + 21 + 41
        assert!((got[0] - 77.0).abs() < 1e-10);
    }

    #[test]
    fn intercept_only_total_closed_form() {
        let x = DMatrix::from_column_slice(4, 1, &[0.5, -1.0, 2.0, 9.0]);
        let y = [2.0, 4.0, 9.0, 1.0];
        let x_out = DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 2.0]);
        let got = plug_in_from_parts(
            &ModelSpec::intercept_only(),
            &x,
            &y,
            &x_out,
            &[Characteristic::total()],
        )
        .unwrap();
        // sum(y) + k * mean(y) = 16 + 3 * 4
        assert!((got[0] - 28.0).abs() < 1e-10);
    }

    #[test]
    fn strategy_name_attached_to_failures() {
        let frame = StudyFrame::new(
            DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]),
            vec![1.0, -2.0, 3.0],
            DMatrix::from_column_slice(1, 1, &[4.0]),
            vec!["x".into()],
        )
        .unwrap();
        let s = PredictionStrategy::plug_in("gamma-one", ModelSpec::gamma());
        let err = plug_in_predict(&s, &frame, frame.y_sample(), &[Characteristic::total()])
            .unwrap_err();
        assert!(matches!(err, WaspError::Strategy { ref strategy, .. } if strategy == "gamma-one"));
    }
}
