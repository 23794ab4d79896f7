//! Sample moments of the clean image and unbiased cumulant statistics of
//! the noisy image.
//!
//! The estimator pipeline consumes exactly five numbers per pair:
//!
//! * raw clean moments `x_bar`, `x2_bar`, `x3_bar` (plain averages of `x`,
//!   `x^2`, `x^3` — the clean image is fully observed, so no bias
//!   correction applies), and
//! * `k2_y`, `k3_y`, the second and third k-statistics of the noisy image:
//!   the minimum-variance unbiased estimators of the second and third
//!   cumulants of the noise distribution,
//!
//!   ```text
//!   k2 = n/(n-1) * m2        k3 = n^2/((n-1)(n-2)) * m3
//!   ```
//!
//!   where `m2`, `m3` are central moments about the sample mean.
//!
//! Every accumulation uses compensated summation so that the million-pixel
//! sums behind these statistics stay accurate to a few ulps.

use crate::buffer::{ImageBuffer, ImagePair};
use crate::error::{Error, Result};
use crate::kahan::KahanSum;

/// Raw moments of a fully observed (noise-free) sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CleanMoments {
    /// Sample count.
    pub n: usize,
    /// Mean of `x`.
    pub x_bar: f64,
    /// Mean of `x^2`.
    pub x2_bar: f64,
    /// Mean of `x^3`.
    pub x3_bar: f64,
}

impl CleanMoments {
    /// Population variance `x2_bar - x_bar^2`.
    pub fn variance(&self) -> f64 {
        self.x2_bar - self.x_bar * self.x_bar
    }

    /// Population third central moment
    /// `x3_bar - 3 x2_bar x_bar + 2 x_bar^3`.
    pub fn third_central(&self) -> f64 {
        self.x3_bar - 3.0 * self.x2_bar * self.x_bar + 2.0 * self.x_bar.powi(3)
    }
}

/// First three raw moments of `values` (at least one sample required).
pub fn clean_moments_of(values: &[f64]) -> Result<CleanMoments> {
    let n = values.len();
    if n == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let mut s1 = KahanSum::new();
    let mut s2 = KahanSum::new();
    let mut s3 = KahanSum::new();
    for &x in values {
        s1.add(x);
        s2.add(x * x);
        s3.add(x * x * x);
    }
    let inv_n = 1.0 / n as f64;
    Ok(CleanMoments {
        n,
        x_bar: s1.value() * inv_n,
        x2_bar: s2.value() * inv_n,
        x3_bar: s3.value() * inv_n,
    })
}

/// First three raw moments of a noise-free image.
pub fn clean_moments(clean: &ImageBuffer) -> Result<CleanMoments> {
    clean_moments_of(clean.pixels())
}

/// Unbiased second and third k-statistics `(k2, k3)` of `values`.
///
/// Two passes: a compensated mean, then compensated central moments about
/// it. Needs at least 3 samples (the `k3` correction divides by `n - 2`).
pub fn k_statistics_of(values: &[f64]) -> Result<(f64, f64)> {
    let n = values.len();
    if n < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: n });
    }
    let nf = n as f64;
    let mut total = KahanSum::new();
    for &y in values {
        total.add(y);
    }
    let mean = total.value() / nf;

    let mut m2 = KahanSum::new();
    let mut m3 = KahanSum::new();
    for &y in values {
        let dev = y - mean;
        let dev2 = dev * dev;
        m2.add(dev2);
        m3.add(dev2 * dev);
    }
    let m2 = m2.value() / nf;
    let m3 = m3.value() / nf;

    let k2 = nf / (nf - 1.0) * m2;
    let k3 = nf * nf / ((nf - 1.0) * (nf - 2.0)) * m3;
    Ok((k2, k3))
}

/// Unbiased second and third k-statistics of a noisy image.
pub fn k_statistics(noisy: &ImageBuffer) -> Result<(f64, f64)> {
    k_statistics_of(noisy.pixels())
}

/// Everything the moment-based estimator needs from one image pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSummary {
    /// Pixel count shared by both halves.
    pub n: usize,
    /// Mean clean intensity.
    pub x_bar: f64,
    /// Mean squared clean intensity.
    pub x2_bar: f64,
    /// Mean cubed clean intensity.
    pub x3_bar: f64,
    /// Unbiased second cumulant of the noisy half.
    pub k2_y: f64,
    /// Unbiased third cumulant of the noisy half.
    pub k3_y: f64,
}

impl MomentSummary {
    /// Population variance of the clean image.
    pub fn clean_variance(&self) -> f64 {
        self.x2_bar - self.x_bar * self.x_bar
    }

    /// Population third central moment of the clean image.
    pub fn clean_third_central(&self) -> f64 {
        self.x3_bar - 3.0 * self.x2_bar * self.x_bar + 2.0 * self.x_bar.powi(3)
    }
}

/// Computes the clean moments and noisy k-statistics of `pair`.
pub fn moment_summary(pair: &ImagePair) -> Result<MomentSummary> {
    let cm = clean_moments(pair.clean())?;
    let (k2_y, k3_y) = k_statistics(pair.noisy())?;
    Ok(MomentSummary {
        n: cm.n,
        x_bar: cm.x_bar,
        x2_bar: cm.x2_bar,
        x3_bar: cm.x3_bar,
        k2_y,
        k3_y,
    })
}
