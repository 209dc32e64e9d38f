//! Small numeric helpers shared across modules: deterministic summation for
//! parallel-safe aggregates, basic sample statistics, and least squares.

use crate::error::{Error, Result};

/// Pairwise (cascade) summation: a fixed reduction tree, so the result does
/// not depend on chunking or thread scheduling, and rounding error grows
/// like O(log n) instead of O(n).
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 64;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(values) / values.len() as f64
}

/// Unbiased sample variance.
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(values);
    let sq: Vec<f64> = values.iter().map(|v| (v - m) * (v - m)).collect();
    pairwise_sum(&sq) / (n - 1) as f64
}

/// Sample mean and its standard error.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let m = mean(values);
    let var = sample_variance(values);
    (m, (var / values.len() as f64).sqrt())
}

/// Population covariance of two equal-length samples.
pub fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    if xs.len() != ys.len() || xs.is_empty() {
        return f64::NAN;
    }
    let mx = mean(xs);
    let my = mean(ys);
    let prods: Vec<f64> = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .collect();
    pairwise_sum(&prods) / xs.len() as f64
}

/// Pearson correlation; NaN when either sample is degenerate.
pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    let c = covariance(xs, ys);
    let vx = covariance(xs, xs);
    let vy = covariance(ys, ys);
    c / (vx * vy).sqrt()
}

/// Ordinary least squares fit `y = intercept + slope * x`.
pub fn ols(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() {
        return Err(Error::invalid(format!(
            "OLS inputs of different lengths: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::invalid("OLS needs at least two points"));
    }
    let vx = covariance(xs, xs);
    if !(vx > 0.0) {
        return Err(Error::invalid("OLS regressor is degenerate"));
    }
    let slope = covariance(xs, ys) / vx;
    let intercept = mean(ys) - slope * mean(xs);
    Ok((slope, intercept))
}
