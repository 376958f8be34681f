use nalgebra::DMatrix;

/// k-nearest-neighbour regressor on standardized covariates.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct KnnRegressor {
    k: usize,
    centre: Vec<f64>,
    scale: Vec<f64>,
    /// Standardized training rows, row-major.
    train: Vec<f64>,
    y: Vec<f64>,
    q: usize,
}

impl KnnRegressor {
    /// `k` larger than the training set is clamped to its size.
    pub(crate) fn fit(x: &DMatrix<f64>, y: &[f64], k: usize) -> Self {
        let (n, q) = (x.nrows(), x.ncols());
        let mut centre = Vec::with_capacity(q);
        let mut scale = Vec::with_capacity(q);
        for j in 0..q {
            let col = x.column(j);
            let mean = col.iter().sum::<f64>() / n as f64;
            let var = if n > 1 {
                col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
            } else {
                0.0
            };
            let sd = var.sqrt();
            centre.push(mean);
            scale.push(if sd > 0.0 { sd } else { 1.0 });
        }
        let mut train = Vec::with_capacity(n * q);
        for i in 0..n {
            for j in 0..q {
                train.push((x[(i, j)] - centre[j]) / scale[j]);
            }
        }
        KnnRegressor {
            k: k.min(n),
            centre,
            scale,
            train,
            y: y.to_vec(),
            q,
        }
    }

    pub(crate) fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let n = self.y.len();
        let mut query = vec![0.0; self.q];
        let mut dist: Vec<(f64, usize)> = Vec::with_capacity(n);
        (0..x.nrows())
            .map(|r| {
                for j in 0..self.q {
                    query[j] = (x[(r, j)] - self.centre[j]) / self.scale[j];
                }
                dist.clear();
                dist.extend((0..n).map(|i| {
                    let row = &self.train[i * self.q..(i + 1) * self.q];
                    let d: f64 = row.iter().zip(&query).map(|(a, b)| (a - b).powi(2)).sum();
                    (d, i)
                }));
                // Distance ties resolved by training row index.
                let by_distance = |a: &(f64, usize), b: &(f64, usize)| {
                    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
                };
                if self.k < n {
                    dist.select_nth_unstable_by(self.k - 1, by_distance);
                }
                let nearest = &mut dist[..self.k];
                nearest.sort_unstable_by_key(|&(_, i)| i);
                nearest.iter().map(|&(_, i)| self.y[i]).sum::<f64>() / self.k as f64
            })
            .collect()
    }
}
