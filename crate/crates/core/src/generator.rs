//! Simulation of full-population response vectors from fitted models.
//!
//! Parametric generators draw from the fitted conditional distribution of
//! each unit. Nonparametric generators add noise drawn from a Gaussian
//! kernel density estimate of the sample residuals. That noise is sampled
//! through the mixture representation (random support point plus kernel
//! noise) and re-centred so each generated noise vector sums to zero.
//!
//! The first `n` entries of every generated vector belong to the sampled
//! units, the remaining `k` to the out-of-sample units, in frame order.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, WaspError};
use crate::zoo::{ErrorSummary, FittedModel};

/// One simulated realisation of the population response.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedPopulation {
    pub y_full: Vec<f64>,
    pub generator_index: usize,
    pub iteration_index: usize,
    n: usize,
}

impl GeneratedPopulation {
    pub fn new(y_full: Vec<f64>, n: usize, generator_index: usize, iteration_index: usize) -> Self {
        assert!(n <= y_full.len(), "sample block longer than the population");
        GeneratedPopulation {
            y_full,
            generator_index,
            iteration_index,
            n,
        }
    }

    /// Responses of the sampled units.
    pub fn sample_block(&self) -> &[f64] {
        &self.y_full[..self.n]
    }

    /// Responses of the out-of-sample units.
    pub fn out_block(&self) -> &[f64] {
        &self.y_full[self.n..]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum BandwidthRule {
    /// `0.9 * min(sd, IQR / 1.34) * n^(-1/5)`.
    #[default]
    Silverman,
    /// `1.06 * sd * n^(-1/5)`.
    Scott,
    Fixed {
        bandwidth: f64,
    },
}

/// Gaussian-kernel density estimate of a residual distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct KdeModel {
    support_points: Vec<f64>,
    bandwidth: f64,
}

impl KdeModel {
    /// Centres `support` to mean zero and checks the bandwidth.
    pub fn new(support: &[f64], bandwidth: f64) -> Result<Self> {
        if support.is_empty() {
            return Err(WaspError::Domain("KDE needs at least one support point".into()));
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(WaspError::Domain(format!(
                "KDE bandwidth must be positive and finite, got {bandwidth}"
            )));
        }
        let mean = support.iter().sum::<f64>() / support.len() as f64;
        Ok(KdeModel {
            support_points: support.iter().map(|r| r - mean).collect(),
            bandwidth,
        })
    }

    pub fn support_points(&self) -> &[f64] {
        &self.support_points
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Variance of the estimated density: spread of the support plus h^2.
    pub fn variance(&self) -> f64 {
        let m = self.support_points.len() as f64;
        self.support_points.iter().map(|v| v * v).sum::<f64>() / m + self.bandwidth.powi(2)
    }

    /// Draws one value from the mixture: a uniformly chosen support point
    /// plus N(0, h^2).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let i = rng.random_range(0..self.support_points.len());
        let z: f64 = StandardNormal.sample(rng);
        self.support_points[i] + self.bandwidth * z
    }
}

/// Sample quantile with linear interpolation between order statistics.
fn interpolated_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn fit_kde(residuals: &[f64], rule: BandwidthRule) -> Result<KdeModel> {
    let m = residuals.len();
    if m < 2 {
        return Err(WaspError::Degenerate(format!(
            "KDE needs at least 2 residuals, got {m}"
        )));
    }
    let mean = residuals.iter().sum::<f64>() / m as f64;
    let sd = (residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt();
    if !(sd > 0.0) {
        return Err(WaspError::Degenerate("residuals are constant".into()));
    }
    let bandwidth = match rule {
        BandwidthRule::Silverman => {
            let mut sorted = residuals.to_vec();
            sorted.sort_by(f64::total_cmp);
            let iqr = interpolated_quantile(&sorted, 0.75) - interpolated_quantile(&sorted, 0.25);
            let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
            0.9 * spread * (m as f64).powf(-0.2)
        }
        BandwidthRule::Scott => 1.06 * sd * (m as f64).powf(-0.2),
        BandwidthRule::Fixed { bandwidth } => bandwidth,
    };
    KdeModel::new(residuals, bandwidth)
}

#[derive(Debug, Clone)]
enum Scheme {
    Normal { mean: Vec<f64>, sd: f64 },
    LogNormal { eta: Vec<f64>, sd: f64 },
    Gamma { mean: Vec<f64>, dispersion: f64 },
    Kde { mean: Vec<f64>, kde: KdeModel },
}

/// A data-generation model with everything precomputed that does not
/// depend on the random stream.
#[derive(Debug, Clone)]
pub struct PreparedGenerator {
    scheme: Scheme,
}

impl PreparedGenerator {
    pub fn parametric(model: &FittedModel, x_full: &DMatrix<f64>) -> Result<Self> {
        let scheme = match model.error_summary() {
            Some(ErrorSummary::NormalVariance(s2)) => Scheme::Normal {
                mean: model.predict(x_full)?,
                sd: s2.sqrt(),
            },
            Some(ErrorSummary::LogNormalVariance(s2)) => Scheme::LogNormal {
                eta: model.linear_predictor(x_full)?,
                sd: s2.sqrt(),
            },
            Some(ErrorSummary::GammaDispersion(dispersion)) => {
                let mean = model.predict(x_full)?;
                if let Some(row) = mean.iter().position(|m| !(*m > 0.0 && m.is_finite())) {
                    return Err(WaspError::Generation {
                        row,
                        message: format!("gamma mean {} is not positive and finite", mean[row]),
                    });
                }
                Scheme::Gamma { mean, dispersion }
            }
            None => return Err(WaspError::Family(model.family().name().into())),
        };
        Ok(PreparedGenerator { scheme })
    }

    pub fn nonparametric(model: &FittedModel, x_full: &DMatrix<f64>, kde: KdeModel) -> Result<Self> {
        if model.family().is_parametric() {
            return Err(WaspError::Family(model.family().name().into()));
        }
        Ok(PreparedGenerator {
            scheme: Scheme::Kde {
                mean: model.predict(x_full)?,
                kde,
            },
        })
    }

    /// Parametric bootstrap for parametric families, residual KDE otherwise.
    pub fn from_model(model: &FittedModel, x_full: &DMatrix<f64>, rule: BandwidthRule) -> Result<Self> {
        if model.family().is_parametric() {
            Self::parametric(model, x_full)
        } else {
            let kde = fit_kde(&model.residuals(), rule)?;
            Self::nonparametric(model, x_full, kde)
        }
    }

    pub fn len(&self) -> usize {
        match &self.scheme {
            Scheme::Normal { mean, .. } | Scheme::Gamma { mean, .. } | Scheme::Kde { mean, .. } => {
                mean.len()
            }
            Scheme::LogNormal { eta, .. } => eta.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Residual density of a nonparametric generator.
    pub fn kde(&self) -> Option<&KdeModel> {
        match &self.scheme {
            Scheme::Kde { kde, .. } => Some(kde),
            _ => None,
        }
    }

    /// Draws one population vector, consuming the stream unit by unit.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.scheme {
            Scheme::Normal { mean, sd } => mean
                .iter()
                .map(|m| {
                    let z: f64 = StandardNormal.sample(rng);
                    m + sd * z
                })
                .collect(),
            Scheme::LogNormal { eta, sd } => eta
                .iter()
                .map(|e| {
                    let z: f64 = StandardNormal.sample(rng);
                    (e + sd * z).exp()
                })
                .collect(),
            Scheme::Gamma { mean, dispersion } => {
                if *dispersion <= 0.0 {
                    return mean.clone();
                }
                let shape = 1.0 / dispersion;
                mean.iter()
                    .map(|m| {
                        Gamma::new(shape, m * dispersion)
                            .expect("shape and scale are positive and finite")
                            .sample(rng)
                    })
                    .collect()
            }
            Scheme::Kde { mean, kde } => {
                let mut noise: Vec<f64> = (0..mean.len()).map(|_| kde.sample(rng)).collect();
                let centre = noise.iter().sum::<f64>() / noise.len() as f64;
                for (e, m) in noise.iter_mut().zip(mean) {
                    *e = m + (*e - centre);
                }
                noise
            }
        }
    }
}

pub fn gen_parametric<R: Rng + ?Sized>(
    model: &FittedModel,
    x_full: &DMatrix<f64>,
    rng: &mut R,
) -> Result<Vec<f64>> {
    Ok(PreparedGenerator::parametric(model, x_full)?.draw(rng))
}

pub fn gen_nonparametric<R: Rng + ?Sized>(
    model: &FittedModel,
    x_full: &DMatrix<f64>,
    kde: &KdeModel,
    rng: &mut R,
) -> Result<Vec<f64>> {
    Ok(PreparedGenerator::nonparametric(model, x_full, kde.clone())?.draw(rng))
}
