//! Parameter estimators for the Poisson-Gaussian model.
//!
//! Both estimators report `(a_inv, b_sq) = (1/a, b^2)`: the slope and
//! intercept of the variance line `Var[y] = x / a + b^2`. That pair is the
//! natural space for accuracy comparisons — errors in it are errors in
//! predicted noise variance.
//!
//! * [`estimate_cumulant`] — moment matching. With `u = 1/a`, the model ties
//!   the noisy image's second and third cumulants to the clean image's
//!   moments:
//!
//!   ```text
//!   k2 = x_bar * u + V + b^2
//!   k3 = C3 + 3 V u + x_bar * u^2
//!   ```
//!
//!   where `V` and `C3` are the clean population variance and third central
//!   moment. Eliminating `b^2` leaves one quadratic in `u`:
//!
//!   ```text
//!   x_bar * u^2 + 3 V u + (C3 - k3) = 0
//!   ```
//!
//!   whose larger root is the physical one (when `k3 >= C3` — noise only
//!   adds positive skew — the roots straddle zero and the larger root is
//!   the nonnegative one).
//!
//! * [`estimate_var`] — groups noisy pixels by quantized clean intensity,
//!   measures the empirical variance of each group about its known clean
//!   mean, and fits the variance line by (weighted) linear least squares.
//!
//! Negative solutions for `a_inv` or `b_sq` are clamped to zero and
//! flagged; a negative discriminant is an error that still carries a
//! clamped boundary estimate for callers that need a number.

use crate::buffer::ImagePair;
use crate::cumulants::{moment_summary, MomentSummary};
use crate::error::{Error, Result};
use crate::kahan::KahanSum;
use crate::sim::NoiseParams;

/// Which estimator produced an [`Estimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Moment matching on second/third cumulants.
    Cumulant,
    /// Per-intensity-level variance line fit.
    Var,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Cumulant => "cumulant",
            Method::Var => "var",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cumulant" => Ok(Method::Cumulant),
            "var" => Ok(Method::Var),
            other => Err(format!("unknown method '{other}' (expected cumulant|var)")),
        }
    }
}

/// How an estimate was obtained and what had to be forced.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Diagnostics {
    /// Discriminant of the cumulant quadratic (`None` for the variance fit).
    pub discriminant: Option<f64>,
    /// `a_inv` came out negative and was clamped to 0.
    pub clamped_a_inv: bool,
    /// `b_sq` came out negative and was clamped to 0.
    pub clamped_b_sq: bool,
    /// Root-sum-square residual of the defining equations at the reported
    /// (possibly clamped) solution; 0 when nothing was clamped and the
    /// system is exactly satisfied.
    pub residual: f64,
}

/// An estimated `(1/a, b^2)` pair with provenance.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Estimate {
    pub method: Method,
    /// Estimated inverse photon scale (slope of the variance line), >= 0.
    pub a_inv: f64,
    /// Estimated read-noise variance (intercept), >= 0.
    pub b_sq: f64,
    pub diagnostics: Diagnostics,
}

impl Estimate {
    /// Estimated `a`, or `None` when `a_inv` is 0 (infinite photon count).
    pub fn a(&self) -> Option<f64> {
        (self.a_inv > 0.0).then(|| 1.0 / self.a_inv)
    }

    /// Estimated `b` (nonnegative square root of `b_sq`).
    pub fn b(&self) -> f64 {
        self.b_sq.sqrt()
    }

    /// Converts back to forward-model parameters. Fails when `a_inv` is 0,
    /// which corresponds to no Poisson component at all.
    pub fn params(&self) -> Result<NoiseParams> {
        let a = self.a().ok_or_else(|| Error::EstimateNotInvertible {
            reason: "a_inv is 0, so a is unbounded".to_string(),
        })?;
        NoiseParams::new(a, self.b())
    }
}

/// Moment-matching estimate from an image pair.
pub fn estimate_cumulant(pair: &ImagePair) -> Result<Estimate> {
    pair.clean().check_clean_range()?;
    let ms = moment_summary(pair)?;
    estimate_cumulant_from_moments(&ms)
}

/// Moment-matching estimate from precomputed moments.
///
/// Split out so exact analytic cumulants can be fed directly (closed-form
/// recovery tests) and so callers can reuse a summary across estimators.
pub fn estimate_cumulant_from_moments(ms: &MomentSummary) -> Result<Estimate> {
    // x_bar is finite by construction (buffers reject non-finite samples).
    if ms.x_bar <= 0.0 {
        return Err(Error::DegenerateClean);
    }
    let v = ms.clean_variance();
    let c3 = ms.clean_third_central();
    let constant = c3 - ms.k3_y;
    let discriminant = 9.0 * v * v - 4.0 * ms.x_bar * constant;
    if discriminant < 0.0 {
        // Boundary estimate with the discriminant forced to zero: the
        // vertex of the quadratic, then the usual clamping.
        let fallback = finish_cumulant(ms, v, c3, -3.0 * v / (2.0 * ms.x_bar), discriminant);
        return Err(Error::NoRealRoot {
            discriminant,
            fallback,
        });
    }
    let u_raw = (-3.0 * v + discriminant.sqrt()) / (2.0 * ms.x_bar);
    Ok(finish_cumulant(ms, v, c3, u_raw, discriminant))
}

/// Clamps, back-substitutes, and packages the cumulant solution.
fn finish_cumulant(ms: &MomentSummary, v: f64, c3: f64, u_raw: f64, discriminant: f64) -> Estimate {
    let clamped_a_inv = u_raw < 0.0;
    let a_inv = if clamped_a_inv { 0.0 } else { u_raw };
    // Back-substitute with the clamped slope so the reported pair is
    // internally consistent.
    let b_raw = ms.k2_y - ms.x_bar * a_inv - v;
    let clamped_b_sq = b_raw < 0.0;
    let b_sq = if clamped_b_sq { 0.0 } else { b_raw };
    let r2 = ms.k2_y - (ms.x_bar * a_inv + v + b_sq);
    let r3 = ms.k3_y - (c3 + 3.0 * v * a_inv + ms.x_bar * a_inv * a_inv);
    Estimate {
        method: Method::Cumulant,
        a_inv,
        b_sq,
        diagnostics: Diagnostics {
            discriminant: Some(discriminant),
            clamped_a_inv,
            clamped_b_sq,
            residual: (r2 * r2 + r3 * r3).sqrt(),
        },
    }
}

/// One group of noisy pixels sharing a quantized clean intensity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityLevelSet {
    /// Quantized clean intensity `round(x * (levels - 1)) / (levels - 1)`.
    pub level: f64,
    /// Mean of the actual clean intensities in the group (equals `level`
    /// when the clean image is already quantized to this depth).
    pub mean_x: f64,
    /// Number of pixels in the group.
    pub count: usize,
    /// Empirical variance of the noisy pixels about `mean_x`. The mean is
    /// known, not estimated, so singleton groups are valid.
    pub emp_var: f64,
}

/// Groups `pair` by quantized clean intensity (`levels` bins across
/// `[0, 1]`, at least 2) and measures each group's empirical variance.
/// Returned sets are sorted by level; empty levels are omitted.
pub fn intensity_level_sets(pair: &ImagePair, levels: u32) -> Result<Vec<IntensityLevelSet>> {
    if levels < 2 {
        return Err(Error::InvalidParams {
            reason: format!("quantization levels must be >= 2, got {levels}"),
        });
    }
    pair.clean().check_clean_range()?;
    let scale = (levels - 1) as f64;
    let n_levels = levels as usize;
    let clean = pair.clean().pixels();
    let noisy = pair.noisy().pixels();

    let mut counts = vec![0usize; n_levels];
    let mut x_sums = vec![KahanSum::new(); n_levels];
    let mut bins = Vec::with_capacity(clean.len());
    for &x in clean {
        let bin = (x * scale).round() as usize; // x in [0,1] => bin in range
        bins.push(bin);
        counts[bin] += 1;
        x_sums[bin].add(x);
    }

    let mean_x: Vec<f64> = (0..n_levels)
        .map(|bin| {
            if counts[bin] > 0 {
                x_sums[bin].value() / counts[bin] as f64
            } else {
                0.0
            }
        })
        .collect();

    let mut dev_sums = vec![KahanSum::new(); n_levels];
    for (i, &y) in noisy.iter().enumerate() {
        let bin = bins[i];
        let dev = y - mean_x[bin];
        dev_sums[bin].add(dev * dev);
    }

    let mut sets = Vec::new();
    for bin in 0..n_levels {
        if counts[bin] > 0 {
            sets.push(IntensityLevelSet {
                level: bin as f64 / scale,
                mean_x: mean_x[bin],
                count: counts[bin],
                emp_var: dev_sums[bin].value() / counts[bin] as f64,
            });
        }
    }
    Ok(sets)
}

/// Settings for the variance-fit estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarConfig {
    /// Quantization levels across `[0, 1]` (256 matches 8-bit sources).
    pub levels: u32,
    /// Weight each level by its pixel count (every pixel counts equally).
    /// When false, every occupied level counts equally instead.
    pub weighted: bool,
}

impl Default for VarConfig {
    fn default() -> Self {
        VarConfig {
            levels: 256,
            weighted: true,
        }
    }
}

/// Variance-line fit: empirical group variances regressed on clean
/// intensity. Needs at least two occupied levels.
pub fn estimate_var(pair: &ImagePair, cfg: &VarConfig) -> Result<Estimate> {
    let sets = intensity_level_sets(pair, cfg.levels)?;
    if sets.len() < 2 {
        return Err(Error::RankDeficient {
            occupied: sets.len(),
        });
    }

    // Weighted least squares for emp_var ~ u * mean_x + b_sq via the
    // 2x2 normal equations.
    let mut sw = KahanSum::new();
    let mut sx = KahanSum::new();
    let mut sxx = KahanSum::new();
    let mut sv = KahanSum::new();
    let mut sxv = KahanSum::new();
    for set in &sets {
        let w = if cfg.weighted { set.count as f64 } else { 1.0 };
        sw.add(w);
        sx.add(w * set.mean_x);
        sxx.add(w * set.mean_x * set.mean_x);
        sv.add(w * set.emp_var);
        sxv.add(w * set.mean_x * set.emp_var);
    }
    let (sw, sx, sxx, sv, sxv) = (sw.value(), sx.value(), sxx.value(), sv.value(), sxv.value());
    // Finite inputs keep det finite; a collapsed design gives det <= 0.
    let det = sw * sxx - sx * sx;
    if det <= 0.0 {
        return Err(Error::RankDeficient {
            occupied: sets.len(),
        });
    }
    let u_raw = (sw * sxv - sx * sv) / det;
    let b_raw = (sxx * sv - sx * sxv) / det;

    let clamped_a_inv = u_raw < 0.0;
    let a_inv = if clamped_a_inv { 0.0 } else { u_raw };
    let clamped_b_sq = b_raw < 0.0;
    let b_sq = if clamped_b_sq { 0.0 } else { b_raw };

    let mut rss = KahanSum::new();
    for set in &sets {
        let w = if cfg.weighted { set.count as f64 } else { 1.0 };
        let r = set.emp_var - (a_inv * set.mean_x + b_sq);
        rss.add(w * r * r);
    }
    let residual = (rss.value() / sw).sqrt();

    Ok(Estimate {
        method: Method::Var,
        a_inv,
        b_sq,
        diagnostics: Diagnostics {
            discriminant: None,
            clamped_a_inv,
            clamped_b_sq,
            residual,
        },
    })
}
