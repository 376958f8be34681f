//! Order-statistic helpers shared by characteristics, accuracy measures and
//! voting criteria.

/// 1-based rank `ceil(p * len)` of the inf-type empirical p-quantile,
/// clamped to `1..=len`.
///
/// `p * len` is snapped to the nearest integer when it lies within a few
/// ulps of it, so `0.07 * 100` selects rank 7 rather than 8.
pub(crate) fn inf_quantile_rank(p: f64, len: usize) -> usize {
    let target = p * len as f64;
    let nearest = target.round();
    let rank = if (target - nearest).abs() <= 8.0 * f64::EPSILON * target.abs().max(1.0) {
        nearest
    } else {
        target.ceil()
    };
    (rank as usize).clamp(1, len)
}

/// Inf-type quantile of already sorted values.
pub(crate) fn inf_quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    sorted[inf_quantile_rank(p, sorted.len()) - 1]
}

/// Median with the midpoint convention for even lengths.
pub(crate) fn median_sorted(sorted: &[f64]) -> f64 {
    let m = sorted.len();
    if m % 2 == 1 {
        sorted[m / 2]
    } else {
        sorted[m / 2 - 1] + (sorted[m / 2] - sorted[m / 2 - 1]) / 2.0
    }
}

pub(crate) fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub(crate) fn median(values: &[f64]) -> f64 {
    median_sorted(&sorted(values))
}

/// Sum taken in ascending order, so it does not depend on input order.
pub(crate) fn order_free_sum(values: &[f64]) -> f64 {
    sorted(values).iter().sum()
}
