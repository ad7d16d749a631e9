//! Shared statistical conventions.
//!
//! One quantile convention is used across the crate:
//! unweighted (or uniformly weighted) samples use linear interpolation between
//! order statistics; non-uniform weights use the left-continuous inverse of the
//! weighted empirical CDF. Median paths always use the weighted lower median.

use std::cmp::Ordering;

use statrs::distribution::{ContinuousCDF, Normal};

/// Slack used when comparing cumulative probability masses.
pub const MASS_TOL: f64 = 1e-12;

pub fn total_cmp(a: &f64, b: &f64) -> Ordering {
    a.total_cmp(b)
}

pub fn mean(values: &[f64]) -> f64 {
    pairwise_sum(values) / values.len() as f64
}

/// Population standard deviation.
pub fn std_pop(values: &[f64]) -> f64 {
    let m = mean(values);
    let sq: Vec<f64> = values.iter().map(|v| (v - m) * (v - m)).collect();
    (pairwise_sum(&sq) / values.len() as f64).sqrt()
}

/// Pairwise (cascade) summation in a fixed order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        values.iter().sum()
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

/// Linear-interpolation quantile of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], level: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = level.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Linear-interpolation quantile of an unsorted sample.
pub fn quantile(values: &[f64], level: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(total_cmp);
    quantile_sorted(&sorted, level)
}

fn is_uniform(weights: &[f64]) -> bool {
    let first = weights[0];
    weights
        .iter()
        .all(|w| (w - first).abs() <= 1e-15 * first.abs().max(1.0))
}

/// Weighted quantile following the crate convention.
///
/// `weights` need not be normalized but must be nonnegative with positive sum.
pub fn weighted_quantile(values: &[f64], weights: Option<&[f64]>, level: f64) -> f64 {
    match weights {
        Some(w) if !is_uniform(w) => {
            let order = sorted_order(values);
            inverse_cdf(values, w, &order, level)
        }
        _ => quantile(values, level),
    }
}

/// Left-continuous inverse CDF: the smallest value whose cumulative weight
/// reaches `level`. `order` must sort `values` ascending.
pub fn inverse_cdf(values: &[f64], weights: &[f64], order: &[usize], level: f64) -> f64 {
    let total: f64 = weights.iter().sum();
    let target = level * total - MASS_TOL * total.max(1.0);
    let mut cum = 0.0;
    let mut last = values[order[0]];
    for &i in order {
        if weights[i] <= 0.0 {
            continue;
        }
        cum += weights[i];
        last = values[i];
        if cum >= target {
            return values[i];
        }
    }
    last
}

/// Weighted lower median. With uniform weights on an even-size sample this is
/// the smaller of the two central order statistics.
pub fn weighted_lower_median(values: &[f64], weights: &[f64]) -> f64 {
    let order = sorted_order(values);
    inverse_cdf(values, weights, &order, 0.5)
}

/// Indices that sort `values` ascending, ties broken by index.
pub fn sorted_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order
}

/// Standard normal quantile function.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_quantile_matches_order_statistics() {
        let v = [3.0, 1.0, 2.0, 4.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert!((quantile(&v, 0.5) - 2.5).abs() < 1e-15);
        assert!((quantile(&v, 0.25) - 1.75).abs() < 1e-15);
    }

    #[test]
    fn uniform_weights_reduce_to_linear_quantile() {
        let v = [5.0, -1.0, 2.0, 7.5, 0.25];
        let w = [0.2; 5];
        for k in 1..100 {
            let a = k as f64 / 100.0;
            assert_eq!(weighted_quantile(&v, Some(&w), a), quantile(&v, a));
        }
    }

    #[test]
    fn lower_median_conventions() {
        assert_eq!(weighted_lower_median(&[0.0, 10.0], &[0.5, 0.5]), 0.0);
        assert_eq!(weighted_lower_median(&[0.0, 10.0], &[0.9, 0.1]), 0.0);
        assert_eq!(weighted_lower_median(&[0.0, 10.0], &[0.4, 0.6]), 10.0);
        assert_eq!(weighted_lower_median(&[7.0], &[1.0]), 7.0);
        let v: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert_eq!(weighted_lower_median(&v, &[0.1; 10]), 4.0);
    }

    #[test]
    fn pairwise_sum_is_exact_on_integers() {
        let v: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 500500.0);
    }

    #[test]
    fn population_std() {
        assert!((std_pop(&[0.0, 2.0]) - 1.0).abs() < 1e-15);
        assert_eq!(std_pop(&[4.0, 4.0, 4.0]), 0.0);
    }
}
