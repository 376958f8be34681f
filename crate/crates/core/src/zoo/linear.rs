use nalgebra::{DMatrix, DVector};

use crate::error::{Result, WaspError};

/// Relative threshold on the diagonal of R below which a column is treated
/// as linearly dependent on the previous ones.
const RANK_TOL: f64 = 1e-10;

/// Prepends a column of ones, or returns just that column when
/// `intercept_only` is set.
pub(crate) fn design_with_intercept(x: &DMatrix<f64>, intercept_only: bool) -> DMatrix<f64> {
    if intercept_only {
        return DMatrix::from_element(x.nrows(), 1, 1.0);
    }
    DMatrix::from_fn(x.nrows(), x.ncols() + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            x[(i, j - 1)]
        }
    })
}

/// Thin QR factorisation of a full-column-rank design, reusable for several
/// right-hand sides.
pub(crate) struct LeastSquares {
    q_t: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl LeastSquares {
    pub(crate) fn new(design: &DMatrix<f64>) -> Result<Self> {
        let columns = design.ncols();
        if design.nrows() < columns {
            return Err(WaspError::RankDeficient {
                rank: design.nrows(),
                columns,
            });
        }
        let qr = design.clone().qr();
        let r = qr.r();
        let scale = r.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let rank = r
            .diagonal()
            .iter()
            .filter(|v| v.abs() > RANK_TOL * scale.max(f64::MIN_POSITIVE))
            .count();
        if rank < columns {
            return Err(WaspError::RankDeficient { rank, columns });
        }
        Ok(LeastSquares {
            q_t: qr.q().transpose(),
            r,
        })
    }

    pub(crate) fn solve(&self, y: &DVector<f64>) -> DVector<f64> {
        let rhs = &self.q_t * y;
        self.r
            .solve_upper_triangular(&rhs)
            .expect("R has a nonzero diagonal after the rank check")
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LinearFit {
    pub coefficients: DVector<f64>,
    pub fitted: DVector<f64>,
    /// RSS / (n - p); zero when there are no residual degrees of freedom.
    pub sigma2: f64,
}

pub(crate) fn ols(design: &DMatrix<f64>, y: &DVector<f64>) -> Result<LinearFit> {
    let ls = LeastSquares::new(design)?;
    let coefficients = ls.solve(y);
    let fitted = design * &coefficients;
    let rss: f64 = y.iter().zip(fitted.iter()).map(|(a, b)| (a - b).powi(2)).sum();
    let df = design.nrows() - design.ncols();
    let sigma2 = if df == 0 { 0.0 } else { rss / df as f64 };
    Ok(LinearFit {
        coefficients,
        fitted,
        sigma2,
    })
}
