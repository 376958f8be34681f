//! Predictive models behind one fit/predict/residuals contract.
//!
//! The same zoo supplies data-generation models and the models inside
//! prediction strategies. Parametric families (`ols_normal`, `lognormal`,
//! `gamma_glm_log_link`) carry an estimated error distribution and get an
//! intercept column prepended automatically; nonparametric families
//! (`regression_tree`, `knn`) only expose their residuals.
//!
//! Every fit is deterministic: nothing here draws random numbers.

mod gamma;
mod knn;
mod linear;
mod tree;

use std::fmt;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, WaspError};
use knn::KnnRegressor;
use tree::RegressionTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    OlsNormal,
    Lognormal,
    GammaGlmLogLink,
    RegressionTree,
    Knn,
}

impl Family {
    pub fn is_parametric(self) -> bool {
        matches!(
            self,
            Family::OlsNormal | Family::Lognormal | Family::GammaGlmLogLink
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::OlsNormal => "ols_normal",
            Family::Lognormal => "lognormal",
            Family::GammaGlmLogLink => "gamma_glm_log_link",
            Family::RegressionTree => "regression_tree",
            Family::Knn => "knn",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn default_max_iter() -> usize {
    50
}
fn default_tol() -> f64 {
    1e-8
}
fn default_max_depth() -> usize {
    6
}
fn default_min_leaf() -> usize {
    5
}
fn default_k_neighbors() -> usize {
    10
}

/// A model family with its hyperparameters.
///
/// In configuration files the family name is the `family` key and the
/// hyperparameters sit next to it, e.g.
/// `{"family": "regression_tree", "max_depth": 4, "min_leaf": 10}`.
/// `intercept_only` turns a parametric family into its mean-only variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    OlsNormal {
        #[serde(default)]
        intercept_only: bool,
    },
    Lognormal {
        #[serde(default)]
        intercept_only: bool,
    },
    GammaGlmLogLink {
        #[serde(default = "default_max_iter")]
        max_iter: usize,
        #[serde(default = "default_tol")]
        tol: f64,
        #[serde(default)]
        intercept_only: bool,
    },
    RegressionTree {
        #[serde(default = "default_max_depth")]
        max_depth: usize,
        #[serde(default = "default_min_leaf")]
        min_leaf: usize,
    },
    Knn {
        #[serde(default = "default_k_neighbors")]
        k_neighbors: usize,
    },
}

impl ModelSpec {
    pub fn ols() -> Self {
        ModelSpec::OlsNormal {
            intercept_only: false,
        }
    }

    pub fn intercept_only() -> Self {
        ModelSpec::OlsNormal {
            intercept_only: true,
        }
    }

    pub fn lognormal() -> Self {
        ModelSpec::Lognormal {
            intercept_only: false,
        }
    }

    pub fn gamma() -> Self {
        ModelSpec::GammaGlmLogLink {
            max_iter: default_max_iter(),
            tol: default_tol(),
            intercept_only: false,
        }
    }

    pub fn tree(max_depth: usize, min_leaf: usize) -> Self {
        ModelSpec::RegressionTree {
            max_depth,
            min_leaf,
        }
    }

    pub fn knn(k_neighbors: usize) -> Self {
        ModelSpec::Knn { k_neighbors }
    }

    pub fn family(&self) -> Family {
        match self {
            ModelSpec::OlsNormal { .. } => Family::OlsNormal,
            ModelSpec::Lognormal { .. } => Family::Lognormal,
            ModelSpec::GammaGlmLogLink { .. } => Family::GammaGlmLogLink,
            ModelSpec::RegressionTree { .. } => Family::RegressionTree,
            ModelSpec::Knn { .. } => Family::Knn,
        }
    }

    pub fn is_parametric(&self) -> bool {
        self.family().is_parametric()
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ModelSpec::GammaGlmLogLink { max_iter, tol, .. } => {
                if max_iter == 0 {
                    return Err(WaspError::Config("gamma max_iter must be >= 1".into()));
                }
                if !(tol > 0.0) {
                    return Err(WaspError::Config(format!("gamma tol must be > 0, got {tol}")));
                }
            }
            ModelSpec::RegressionTree {
                max_depth,
                min_leaf,
            } => {
                if max_depth == 0 {
                    return Err(WaspError::Config("tree max_depth must be >= 1".into()));
                }
                if min_leaf == 0 {
                    return Err(WaspError::Config("tree min_leaf must be >= 1".into()));
                }
            }
            ModelSpec::Knn { k_neighbors } => {
                if k_neighbors == 0 {
                    return Err(WaspError::Config("knn k_neighbors must be >= 1".into()));
                }
            }
            ModelSpec::OlsNormal { .. } | ModelSpec::Lognormal { .. } => {}
        }
        Ok(())
    }
}

/// Estimated error distribution of a parametric fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorSummary {
    /// Residual variance of an additive normal error.
    NormalVariance(f64),
    /// Error variance on the log scale.
    LogNormalVariance(f64),
    /// Gamma dispersion; variance = dispersion * mean^2.
    GammaDispersion(f64),
}

#[derive(Debug, Clone)]
enum Fitted {
    Linear {
        coefficients: DVector<f64>,
        intercept_only: bool,
        sigma2: f64,
        /// Log-normal fits predict `exp(eta + sigma2 / 2)`.
        log_scale: bool,
    },
    Gamma {
        coefficients: DVector<f64>,
        intercept_only: bool,
        dispersion: f64,
        deviance_trace: Vec<f64>,
    },
    Tree(RegressionTree),
    Knn {
        regressor: KnnRegressor,
        x_train: DMatrix<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct FittedModel {
    spec: ModelSpec,
    q: usize,
    y_train: Vec<f64>,
    fitted: OnceLock<Vec<f64>>,
    state: Fitted,
}

pub fn fit(spec: &ModelSpec, x: &DMatrix<f64>, y: &[f64]) -> Result<FittedModel> {
    spec.validate()?;
    if x.nrows() != y.len() {
        return Err(WaspError::Shape {
            expected: x.nrows(),
            actual: y.len(),
        });
    }
    if y.is_empty() {
        return Err(WaspError::Domain("cannot fit on an empty sample".into()));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(WaspError::Domain(format!("response at row {i} is not finite")));
    }
    if matches!(spec.family(), Family::Lognormal | Family::GammaGlmLogLink) {
        if let Some(i) = y.iter().position(|&v| v <= 0.0) {
            return Err(WaspError::Domain(format!(
                "{} needs a positive response, row {i} has {}",
                spec.family(),
                y[i]
            )));
        }
    }

    let fitted = OnceLock::new();
    let state = match *spec {
        ModelSpec::OlsNormal { intercept_only } => {
            let design = linear::design_with_intercept(x, intercept_only);
            let ls = linear::ols(&design, &DVector::from_column_slice(y))?;
            let _ = fitted.set(ls.fitted.iter().copied().collect());
            Fitted::Linear {
                coefficients: ls.coefficients,
                intercept_only,
                sigma2: ls.sigma2,
                log_scale: false,
            }
        }
        ModelSpec::Lognormal { intercept_only } => {
            let design = linear::design_with_intercept(x, intercept_only);
            let log_y = DVector::from_iterator(y.len(), y.iter().map(|v| v.ln()));
            let ls = linear::ols(&design, &log_y)?;
            let shift = ls.sigma2 / 2.0;
            let _ = fitted.set(ls.fitted.iter().map(|eta| (eta + shift).exp()).collect());
            Fitted::Linear {
                coefficients: ls.coefficients,
                intercept_only,
                sigma2: ls.sigma2,
                log_scale: true,
            }
        }
        ModelSpec::GammaGlmLogLink {
            max_iter,
            tol,
            intercept_only,
        } => {
            let design = linear::design_with_intercept(x, intercept_only);
            let g = gamma::fit(&design, &DVector::from_column_slice(y), max_iter, tol)?;
            let _ = fitted.set(g.fitted.iter().copied().collect());
            Fitted::Gamma {
                coefficients: g.coefficients,
                intercept_only,
                dispersion: g.dispersion,
                deviance_trace: g.deviance_trace,
            }
        }
        ModelSpec::RegressionTree {
            max_depth,
            min_leaf,
        } => {
            let (tree, values) = RegressionTree::fit(x, y, max_depth, min_leaf);
            let _ = fitted.set(values);
            Fitted::Tree(tree)
        }
        ModelSpec::Knn { k_neighbors } => Fitted::Knn {
            regressor: KnnRegressor::fit(x, y, k_neighbors),
            x_train: x.clone(),
        },
    };

    Ok(FittedModel {
        spec: spec.clone(),
        q: x.ncols(),
        y_train: y.to_vec(),
        fitted,
        state,
    })
}

impl FittedModel {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn family(&self) -> Family {
        self.spec.family()
    }

    /// Number of covariate columns the model was trained on.
    pub fn n_features(&self) -> usize {
        self.q
    }

    pub fn n_train(&self) -> usize {
        self.y_train.len()
    }

    /// Regression coefficients (intercept first) of parametric fits.
    pub fn coefficients(&self) -> Option<&DVector<f64>> {
        match &self.state {
            Fitted::Linear { coefficients, .. } | Fitted::Gamma { coefficients, .. } => {
                Some(coefficients)
            }
            _ => None,
        }
    }

    pub fn error_summary(&self) -> Option<ErrorSummary> {
        match &self.state {
            Fitted::Linear {
                sigma2, log_scale, ..
            } => Some(if *log_scale {
                ErrorSummary::LogNormalVariance(*sigma2)
            } else {
                ErrorSummary::NormalVariance(*sigma2)
            }),
            Fitted::Gamma { dispersion, .. } => Some(ErrorSummary::GammaDispersion(*dispersion)),
            _ => None,
        }
    }

    /// Deviance after the starting step and after every accepted IRLS step.
    pub fn deviance_trace(&self) -> Option<&[f64]> {
        match &self.state {
            Fitted::Gamma { deviance_trace, .. } => Some(deviance_trace),
            _ => None,
        }
    }

    fn check_columns(&self, x: &DMatrix<f64>) -> Result<()> {
        if x.ncols() != self.q {
            return Err(WaspError::Shape {
                expected: self.q,
                actual: x.ncols(),
            });
        }
        Ok(())
    }

    /// `X beta` including the intercept, for parametric families.
    pub fn linear_predictor(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        self.check_columns(x)?;
        match &self.state {
            Fitted::Linear {
                coefficients,
                intercept_only,
                ..
            }
            | Fitted::Gamma {
                coefficients,
                intercept_only,
                ..
            } => {
                let design = linear::design_with_intercept(x, *intercept_only);
                Ok((design * coefficients).iter().copied().collect())
            }
            _ => Err(WaspError::Family(self.family().name().into())),
        }
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        self.check_columns(x)?;
        let values = match &self.state {
            Fitted::Linear {
                sigma2, log_scale, ..
            } => {
                let eta = self.linear_predictor(x)?;
                if *log_scale {
                    let shift = sigma2 / 2.0;
                    eta.into_iter().map(|e| (e + shift).exp()).collect()
                } else {
                    eta
                }
            }
            Fitted::Gamma { .. } => self
                .linear_predictor(x)?
                .into_iter()
                .map(f64::exp)
                .collect(),
            Fitted::Tree(tree) => (0..x.nrows())
                .map(|r| tree.predict_row(|j| x[(r, j)]))
                .collect(),
            Fitted::Knn { regressor, .. } => regressor.predict(x),
        };
        Ok(values)
    }

    /// In-sample fitted values; computed lazily for k-NN.
    pub fn fitted_values(&self) -> &[f64] {
        self.fitted.get_or_init(|| match &self.state {
            Fitted::Knn { regressor, x_train } => regressor.predict(x_train),
            _ => unreachable!("eager families cache fitted values at fit time"),
        })
    }

    /// Sample residuals `y - h(X_S)`.
    pub fn residuals(&self) -> Vec<f64> {
        self.y_train
            .iter()
            .zip(self.fitted_values())
            .map(|(y, f)| y - f)
            .collect()
    }
}

pub fn predict(model: &FittedModel, x: &DMatrix<f64>) -> Result<Vec<f64>> {
    model.predict(x)
}

pub fn residuals(model: &FittedModel) -> Vec<f64> {
    model.residuals()
}

#[cfg(test)]
mod tests {
    use super::*;

    macro_rules! assert_close {
        ($a:expr, $b:expr, $tol:expr) => {{
            let (a, b): (f64, f64) = ($a, $b);
            assert!((a - b).abs() <= $tol, "{a} vs {b} (tol {})", $tol);
        }};
    }

    fn column(values: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(values.len(), 1, values)
    }

    #[test]
    fn ols_exact_linear_data() {
        let x = column(&[1.0, 2.0, 3.0]);
        let m = fit(&ModelSpec::ols(), &x, &[2.0, 4.0, 6.0]).unwrap();
        let beta = m.coefficients().unwrap();
        assert_close!(beta[0], 0.0, 1e-12);
        assert_close!(beta[1], 2.0, 1e-12);
        match m.error_summary() {
            Some(ErrorSummary::NormalVariance(s2)) => assert_close!(s2, 0.0, 1e-20),
            other => panic!("{other:?}"),
        }
        assert_close!(m.predict(&column(&[4.0])).unwrap()[0], 8.0, 1e-12);
        for r in m.residuals() {
            assert_close!(r, 0.0, 1e-12);
        }
    }

    #[test]
    fn intercept_only_residuals_sum_to_zero() {
        let x = column(&[0.3, 1.0, -2.0, 7.0, 4.0]);
        let y = [3.1, -2.0, 8.5, 0.25, 11.0];
        let m = fit(&ModelSpec::intercept_only(), &x, &y).unwrap();
        assert!(m.residuals().iter().sum::<f64>().abs() < 1e-10);
        let mean = y.iter().sum::<f64>() / 5.0;
        assert_close!(m.predict(&column(&[100.0])).unwrap()[0], mean, 1e-12);
    }

    #[test]
    fn knn_full_neighbourhood_is_the_mean() {
        let x = DMatrix::from_row_slice(4, 2, &[0.0, 1.0, 3.0, 2.0, 5.0, 5.0, 1.0, 9.0]);
        let y = [1.0, 2.0, 4.0, 8.0];
        let m = fit(&ModelSpec::knn(4), &x, &y).unwrap();
        let probe = DMatrix::from_row_slice(2, 2, &[-50.0, 3.0, 7.0, 7.0]);
        for v in m.predict(&probe).unwrap() {
            assert_close!(v, 3.75, 1e-12);
        }
        for v in m.fitted_values() {
            assert_close!(*v, 3.75, 1e-12);
        }
    }

    #[test]
    fn tree_on_pure_leaves_reproduces_training_response() {
        let x = DMatrix::from_row_slice(
            6,
            2,
            &[0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0, 2.0, 0.0, 2.0, 1.0],
        );
        let y = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let m = fit(&ModelSpec::tree(10, 1), &x, &y).unwrap();
        assert_eq!(m.predict(&x).unwrap(), y.to_vec());
    }

    #[test]
    fn lognormal_prediction_matches_fitted_value_of_same_row() {
        let x = column(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let y = [2.0, 3.5, 3.0, 7.0, 9.0];
        let m = fit(&ModelSpec::lognormal(), &x, &y).unwrap();
        let again = m.predict(&column(&[3.0])).unwrap()[0];
        assert_eq!(again, m.fitted_values()[2]);
        // exp(eta + s2 / 2)
        let eta = m.linear_predictor(&column(&[3.0])).unwrap()[0];
        let Some(ErrorSummary::LogNormalVariance(s2)) = m.error_summary() else {
            panic!()
        };
        assert_close!(again, (eta + s2 / 2.0).exp(), 1e-12);
    }

    #[test]
    fn positive_families_reject_nonpositive_response() {
        let x = column(&[1.0, 2.0, 3.0]);
        for spec in [ModelSpec::lognormal(), ModelSpec::gamma()] {
            let err = fit(&spec, &x, &[1.0, 0.0, 2.0]).unwrap_err();
            assert!(matches!(err, WaspError::Domain(_)), "{err}");
        }
    }

    #[test]
    fn singular_design_is_reported() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        let err = fit(&ModelSpec::ols(), &x, &[1.0, 2.0, 3.0]).unwrap_err();
        assert!(matches!(err, WaspError::RankDeficient { .. }));
    }

    #[test]
    fn gamma_iteration_cap_is_reported() {
        let x = column(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let y = [1.0, 9.0, 2.0, 30.0, 0.5, 12.0];
        let spec = ModelSpec::GammaGlmLogLink {
            max_iter: 1,
            tol: 1e-300,
            intercept_only: false,
        };
        let err = fit(&spec, &x, &y).unwrap_err();
        assert!(matches!(err, WaspError::Convergence { iterations: 1 }), "{err}");
    }

    #[test]
    fn predict_checks_column_count() {
        let m = fit(&ModelSpec::ols(), &column(&[1.0, 2.0, 3.0]), &[1.0, 2.0, 4.0]).unwrap();
        let err = m.predict(&DMatrix::zeros(2, 3)).unwrap_err();
        assert!(matches!(err, WaspError::Shape { expected: 1, actual: 3 }));
    }

    #[test]
    fn hyperparameters_validated() {
        assert!(ModelSpec::knn(0).validate().is_err());
        assert!(ModelSpec::tree(0, 1).validate().is_err());
        assert!(ModelSpec::tree(1, 0).validate().is_err());
        let bad_tol = ModelSpec::GammaGlmLogLink {
            max_iter: 5,
            tol: 0.0,
            intercept_only: false,
        };
        assert!(bad_tol.validate().is_err());
    }

    #[test]
    fn parametric_split() {
        assert!(ModelSpec::ols().is_parametric());
        assert!(ModelSpec::lognormal().is_parametric());
        assert!(ModelSpec::gamma().is_parametric());
        assert!(!ModelSpec::tree(3, 1).is_parametric());
        assert!(!ModelSpec::knn(3).is_parametric());
    }
}
