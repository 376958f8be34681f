//! Gamma GLM with log link fitted by iteratively reweighted least squares.
//!
//! With the log link the IRLS working weights `(dmu/deta)^2 / V(mu)` are
//! identically one, so every step is an ordinary least-squares solve of the
//! working response on the same design and the QR factorisation is reused.

use nalgebra::{DMatrix, DVector};

use super::linear::LeastSquares;
use crate::error::{Result, WaspError};

const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone)]
pub(crate) struct GammaFit {
    pub coefficients: DVector<f64>,
    pub fitted: DVector<f64>,
    /// Pearson chi-square over residual degrees of freedom.
    pub dispersion: f64,
    pub deviance_trace: Vec<f64>,
}

pub(crate) fn deviance(y: &DVector<f64>, mu: &DVector<f64>) -> f64 {
    2.0 * y
        .iter()
        .zip(mu.iter())
        .map(|(&y, &m)| -(y / m).ln() + (y - m) / m)
        .sum::<f64>()
}

fn mean_from(design: &DMatrix<f64>, beta: &DVector<f64>) -> DVector<f64> {
    (design * beta).map(f64::exp)
}

pub(crate) fn fit(
    design: &DMatrix<f64>,
    y: &DVector<f64>,
    max_iter: usize,
    tol: f64,
) -> Result<GammaFit> {
    let ls = LeastSquares::new(design)?;

    // Starting from mu = y the first working response is log(y).
    let mut beta = ls.solve(&y.map(f64::ln));
    let mut mu = mean_from(design, &beta);
    let mut dev = deviance(y, &mu);
    if !dev.is_finite() {
        return Err(WaspError::Convergence { iterations: 0 });
    }
    let mut trace = vec![dev];

    let mut converged = false;
    for _ in 0..max_iter {
        let eta = design * &beta;
        let z = DVector::from_fn(y.len(), |i, _| eta[i] + (y[i] - mu[i]) / mu[i]);
        let mut candidate = ls.solve(&z);
        let mut mu_new = mean_from(design, &candidate);
        let mut dev_new = deviance(y, &mu_new);

        let mut halvings = 0;
        while !(dev_new.is_finite() && dev_new <= dev) {
            if halvings == MAX_HALVINGS {
                break;
            }
            candidate = (&candidate + &beta) * 0.5;
            mu_new = mean_from(design, &candidate);
            dev_new = deviance(y, &mu_new);
            halvings += 1;
        }
        if !(dev_new.is_finite() && dev_new <= dev) {
            // No descent direction left: the current iterate is as good as it gets.
            converged = true;
            break;
        }

        let change = (dev - dev_new).abs() / (dev_new.abs() + 0.1);
        beta = candidate;
        mu = mu_new;
        dev = dev_new;
        trace.push(dev);
        if change < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(WaspError::Convergence {
            iterations: max_iter,
        });
    }

    let n = y.len();
    let p = design.ncols();
    let pearson: f64 = y
        .iter()
        .zip(mu.iter())
        .map(|(&y, &m)| ((y - m) / m).powi(2))
        .sum();
    let dispersion = if n > p { pearson / (n - p) as f64 } else { 0.0 };
    Ok(GammaFit {
        coefficients: beta,
        fitted: mu,
        dispersion,
        deviance_trace: trace,
    })
}
