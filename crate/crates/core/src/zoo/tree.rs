//! Greedy CART regression tree grown on squared-error (variance) reduction.

use nalgebra::DMatrix;

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct RegressionTree {
    nodes: Vec<Node>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    sse: f64,
    split_at: usize,
    order: Vec<usize>,
}

struct Builder<'a> {
    x: &'a DMatrix<f64>,
    y: &'a [f64],
    max_depth: usize,
    min_leaf: usize,
    nodes: Vec<Node>,
    fitted: Vec<f64>,
}

fn mean(y: &[f64], rows: &[usize]) -> f64 {
    rows.iter().map(|&i| y[i]).sum::<f64>() / rows.len() as f64
}

impl Builder<'_> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let value = mean(self.y, &rows);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value });

        let parent_sse: f64 = rows.iter().map(|&i| (self.y[i] - value).powi(2)).sum();
        let splittable = depth < self.max_depth && rows.len() >= 2 * self.min_leaf;
        let best = if splittable && parent_sse > 0.0 {
            self.best_split(&rows, value)
        } else {
            None
        };

        match best {
            Some(c) if c.sse < parent_sse * (1.0 - 1e-12) => {
                let (left_rows, right_rows) = c.order.split_at(c.split_at);
                let left = self.grow(left_rows.to_vec(), depth + 1);
                let right = self.grow(right_rows.to_vec(), depth + 1);
                self.nodes[id] = Node::Split {
                    feature: c.feature,
                    threshold: c.threshold,
                    left,
                    right,
                };
            }
            _ => {
                for &i in &rows {
                    self.fitted[i] = value;
                }
            }
        }
        id
    }

    fn best_split(&self, rows: &[usize], centre: f64) -> Option<Candidate> {
        let m = rows.len();
        let mut best: Option<Candidate> = None;
        for feature in 0..self.x.ncols() {
            let mut order = rows.to_vec();
            order.sort_by(|&a, &b| {
                self.x[(a, feature)]
                    .total_cmp(&self.x[(b, feature)])
                    .then(a.cmp(&b))
            });
            // Prefix sums of the centred response.
            let total: f64 = order.iter().map(|&i| self.y[i] - centre).sum();
            let total_sq: f64 = order.iter().map(|&i| (self.y[i] - centre).powi(2)).sum();
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            let mut local: Option<(usize, f64)> = None;
            for split in 1..m {
                let v = self.y[order[split - 1]] - centre;
                sum += v;
                sum_sq += v * v;
                if split < self.min_leaf || m - split < self.min_leaf {
                    continue;
                }
                let lo = self.x[(order[split - 1], feature)];
                let hi = self.x[(order[split], feature)];
                if lo >= hi {
                    continue;
                }
                let (nl, nr) = (split as f64, (m - split) as f64);
                let sse_left = sum_sq - sum * sum / nl;
                let sse_right = (total_sq - sum_sq) - (total - sum).powi(2) / nr;
                let sse = (sse_left + sse_right).max(0.0);
                if local.is_none_or(|(_, s)| sse < s) {
                    local = Some((split, sse));
                }
            }
            if let Some((split, sse)) = local {
                if best.as_ref().is_none_or(|b| sse < b.sse) {
                    let lo = self.x[(order[split - 1], feature)];
                    let hi = self.x[(order[split], feature)];
                    let mut threshold = lo + (hi - lo) / 2.0;
                    // Midpoint can round up to `hi` for adjacent floats.
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(Candidate {
                        feature,
                        threshold,
                        sse,
                        split_at: split,
                        order,
                    });
                }
            }
        }
        best
    }
}

impl RegressionTree {
    /// Grows a tree and returns it with the in-sample fitted values.
    pub(crate) fn fit(
        x: &DMatrix<f64>,
        y: &[f64],
        max_depth: usize,
        min_leaf: usize,
    ) -> (Self, Vec<f64>) {
        let mut builder = Builder {
            x,
            y,
            max_depth,
            min_leaf,
            nodes: Vec::new(),
            fitted: vec![0.0; y.len()],
        };
        builder.grow((0..y.len()).collect(), 0);
        (
            RegressionTree {
                nodes: builder.nodes,
            },
            builder.fitted,
        )
    }

    pub(crate) fn predict_row(&self, row: impl Fn(usize) -> f64) -> f64 {
        let mut id = 0;
        loop {
            match self.nodes[id] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if row(feature) <= threshold { left } else { right },
            }
        }
    }

    #[cfg(test)]
    pub(crate) fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_function_is_recovered() {
        let x = DMatrix::from_column_slice(6, 1, &[1.0, 2.0, 3.0, 10.0, 11.0, 12.0]);
        let y = [5.0, 5.0, 5.0, 9.0, 9.0, 9.0];
        let (tree, fitted) = RegressionTree::fit(&x, &y, 3, 1);
        assert_eq!(tree.leaf_count(), 2);
        assert_eq!(fitted, y.to_vec());
        assert_eq!(tree.predict_row(|_| 6.4), 5.0);
        assert_eq!(tree.predict_row(|_| 6.6), 9.0);
    }

    #[test]
    fn depth_limit_respected() {
        let x = DMatrix::from_fn(16, 1, |i, _| i as f64);
        let y: Vec<f64> = (0..16).map(|i| (i * i) as f64).collect();
        let (tree, _) = RegressionTree::fit(&x, &y, 2, 1);
        assert!(tree.leaf_count() <= 4);
    }

    #[test]
    fn min_leaf_blocks_small_children() {
        let x = DMatrix::from_column_slice(4, 1, &[0.0, 1.0, 2.0, 3.0]);
        let y = [0.0, 0.0, 0.0, 100.0];
        let (tree, fitted) = RegressionTree::fit(&x, &y, 5, 2);
        assert_eq!(tree.leaf_count(), 2);
        assert_eq!(fitted, vec![0.0, 0.0, 50.0, 50.0]);
    }
}
