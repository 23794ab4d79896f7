//! Descriptive statistics shared by the evaluation harness: summaries,
//! quantiles, and interquartile-range outlier fences.

use crate::error::{Error, Result};
use crate::kahan::KahanSum;

/// Descriptive summary of a set of nonnegative error values.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct StatSummary {
    /// Number of values summarized.
    pub count: usize,
    /// Arithmetic mean.
    pub mean: f64,
    /// Population standard deviation (divides by `count`).
    pub std_dev: f64,
    /// 75% quantile (linear interpolation between order statistics).
    pub q75: f64,
    /// Largest value.
    pub max: f64,
}

/// Summarizes `values`; errors when empty.
pub fn summarize_values(values: &[f64]) -> Result<StatSummary> {
    if values.is_empty() {
        return Err(Error::EmptySelection);
    }
    let n = values.len() as f64;
    let mut sum = KahanSum::new();
    for &v in values {
        sum.add(v);
    }
    let mean = sum.value() / n;
    let mut sq = KahanSum::new();
    let mut max = f64::NEG_INFINITY;
    for &v in values {
        sq.add((v - mean) * (v - mean));
        if v > max {
            max = v;
        }
    }
    let std_dev = (sq.value() / n).sqrt();
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let q75 = quantile_sorted(&sorted, 0.75);
    Ok(StatSummary {
        count: values.len(),
        mean,
        std_dev,
        q75,
        max,
    })
}

/// Quantile of an ascending-sorted slice by linear interpolation between
/// order statistics: rank `h = p * (n - 1)`, value
/// `v[floor(h)] + frac(h) * (v[floor(h) + 1] - v[floor(h)])`.
///
/// Panics on an empty slice or `p` outside `[0, 1]`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    assert!(
        (0.0..=1.0).contains(&p),
        "quantile level {p} outside [0, 1]"
    );
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Upper outlier fence `Q3 + 1.5 * (Q3 - Q1)` of `values` (unsorted input).
pub fn iqr_upper_fence(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptySelection);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    Ok(q3 + 1.5 * (q3 - q1))
}

/// Marks each value as kept (`true`) or dropped (`false`) under the upper
/// IQR fence. Only values *strictly above* the fence are dropped, so a set
/// of identical values keeps everything.
pub fn iqr_keep_mask(values: &[f64]) -> Result<Vec<bool>> {
    let fence = iqr_upper_fence(values)?;
    Ok(values.iter().map(|&v| v <= fence).collect())
}
