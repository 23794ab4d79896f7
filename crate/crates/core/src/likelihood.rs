//! Exact (truncated) log-likelihood of an image pair under the
//! Poisson-Gaussian model.
//!
//! The density of one noisy sample `y` given clean intensity `x` is a
//! Poisson mixture of Gaussians — one Gaussian per latent photon count `k`:
//!
//! ```text
//! p(y | x) = sum_k  exp( k ln(a x) - ln k! - a x )         (Poisson weight)
//!                 * exp( -(y - k/a)^2 / (2 b^2) ) / (b sqrt(2 pi))
//! ```
//!
//! The infinite sum is truncated at a per-pixel `k_max` chosen so the
//! neglected Poisson tail mass stays below a configurable bound, and each
//! pixel's sum is evaluated in log space (log-sum-exp) so small densities
//! do not underflow. `x = 0` collapses the sum to its `k = 0` Gaussian
//! term. Evaluation only — no optimizer lives here; a small grid-refinement
//! helper is provided for polishing an estimate.

use statrs::function::gamma::ln_gamma;

use crate::buffer::ImagePair;
use crate::error::{Error, Result};
use crate::estimators::Estimate;
use crate::kahan::KahanSum;
use crate::sim::NoiseParams;

/// Truncation controls for the likelihood sum.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LikelihoodConfig {
    /// Upper bound on the neglected Poisson tail mass per pixel
    /// (`0 < tail_mass < 1`).
    pub tail_mass: f64,
    /// Absolute safety cap on the summation index (`>= 1`).
    pub k_cap: usize,
}

impl LikelihoodConfig {
    pub fn new(tail_mass: f64, k_cap: usize) -> Result<Self> {
        if !(tail_mass.is_finite() && tail_mass > 0.0 && tail_mass < 1.0) {
            return Err(Error::InvalidLikelihoodConfig {
                reason: format!("tail_mass must lie in (0, 1), got {tail_mass}"),
            });
        }
        if k_cap == 0 {
            return Err(Error::InvalidLikelihoodConfig {
                reason: "k_cap must be at least 1".to_string(),
            });
        }
        Ok(LikelihoodConfig { tail_mass, k_cap })
    }
}

impl Default for LikelihoodConfig {
    fn default() -> Self {
        LikelihoodConfig {
            tail_mass: 1e-12,
            k_cap: 10_000,
        }
    }
}

/// Log-likelihood of a pair, with truncation bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LogLik {
    /// Total log-likelihood over all pixels.
    pub ll: f64,
    /// Largest per-pixel truncation index used.
    pub k_max_max: usize,
    /// Number of pixels evaluated.
    pub pixels: usize,
}

/// `ln k!` from the precomputed table, falling back to the log-gamma
/// routine for indices past the table.
#[inline]
fn ln_factorial(k: usize, table: &[f64]) -> f64 {
    match table.get(k) {
        Some(&v) => v,
        None => ln_gamma(k as f64 + 1.0),
    }
}

/// Geometric-series bound on the upper Poisson tail:
/// `P(X > m) <= pmf(m + 1) / (1 - rate/(m + 2))`, valid for `m + 2 > rate`
/// (successive pmf ratios are then below `rate/(m + 2) < 1`).
fn poisson_tail_bound(rate: f64, m: usize, table: &[f64]) -> f64 {
    let k = (m + 1) as f64;
    let log_pmf = k * rate.ln() - rate - ln_factorial(m + 1, table);
    log_pmf.exp() / (1.0 - rate / (m as f64 + 2.0))
}

/// Truncation index for one pixel's rate: start at
/// `max(8, ceil(rate + 10 sqrt(rate + 1)))` and extend until the bounded
/// tail mass drops below `cfg.tail_mass` (or `cfg.k_cap` is hit).
fn k_max_for_rate(rate: f64, cfg: &LikelihoodConfig, table: &[f64]) -> usize {
    debug_assert!(rate > 0.0);
    let heuristic = (rate + 10.0 * (rate + 1.0).sqrt()).ceil() as usize;
    let mut m = heuristic.max(8);
    let step = ((0.5 * rate.sqrt()).ceil() as usize).max(4);
    while m < cfg.k_cap && poisson_tail_bound(rate, m, table) >= cfg.tail_mass {
        m += step;
    }
    m.min(cfg.k_cap)
}

/// Evaluates the truncated log-likelihood of `pair` under `params`.
///
/// Requires `b > 0` strictly (with `b = 0` the density degenerates to a
/// lattice of point masses) and clean intensities in `[0, 1]`.
pub fn log_likelihood(
    pair: &ImagePair,
    params: NoiseParams,
    cfg: &LikelihoodConfig,
) -> Result<LogLik> {
    let a = params.a();
    let b = params.b();
    if b <= 0.0 {
        return Err(Error::DegenerateLikelihood { a, b });
    }
    pair.clean().check_clean_range()?;

    // ln k! table sized for the largest rate in the image (k_max grows
    // with rate, so this covers every pixel; the fallback handles any
    // overshoot from the search step).
    let max_x = pair
        .clean()
        .pixels()
        .iter()
        .fold(0.0f64, |acc, &x| acc.max(x));
    let table = {
        let cap = if max_x > 0.0 {
            k_max_for_rate(a * max_x, cfg, &[]) + 80
        } else {
            1
        };
        let mut t = Vec::with_capacity(cap + 1);
        for k in 0..=cap {
            t.push(ln_gamma(k as f64 + 1.0));
        }
        t
    };

    let gauss_norm_log = -(b * (2.0 * std::f64::consts::PI).sqrt()).ln();
    let inv_two_b_sq = 1.0 / (2.0 * b * b);

    let mut total = KahanSum::new();
    let mut k_max_max = 0usize;
    let mut terms: Vec<f64> = Vec::new();
    for (&x, &y) in pair
        .clean()
        .pixels()
        .iter()
        .zip(pair.noisy().pixels().iter())
    {
        let rate = a * x;
        let pixel_ll = if rate == 0.0 {
            // Zero photon rate: only k = 0 survives.
            gauss_norm_log - y * y * inv_two_b_sq
        } else {
            let k_max = k_max_for_rate(rate, cfg, &table);
            if k_max > k_max_max {
                k_max_max = k_max;
            }
            let ln_rate = rate.ln();
            terms.clear();
            let mut max_term = f64::NEG_INFINITY;
            for k in 0..=k_max {
                let kf = k as f64;
                let dev = y - kf / a;
                let t = kf * ln_rate - ln_factorial(k, &table) - rate + gauss_norm_log
                    - dev * dev * inv_two_b_sq;
                terms.push(t);
                if t > max_term {
                    max_term = t;
                }
            }
            let mut s = 0.0f64;
            for &t in &terms {
                s += (t - max_term).exp();
            }
            max_term + s.ln()
        };
        total.add(pixel_ll);
    }

    Ok(LogLik {
        ll: total.value(),
        k_max_max,
        pixels: pair.len(),
    })
}

/// Relative gap between two log-likelihood values:
/// `|(ll_est - ll_ref) / ll_ref|`. Errors when the reference is zero.
pub fn relative_gap(ll_est: f64, ll_ref: f64) -> Result<f64> {
    if ll_ref == 0.0 {
        return Err(Error::ZeroReferenceLikelihood);
    }
    Ok(((ll_est - ll_ref) / ll_ref).abs())
}

/// How much likelihood an estimate gives up (or gains) relative to the true
/// parameters, as `|(LL(est) - LL(true)) / LL(true)|`.
///
/// The estimate must be convertible to strictly positive `(a, b)`.
pub fn relative_ll_gap(
    pair: &ImagePair,
    true_params: NoiseParams,
    est: &Estimate,
    cfg: &LikelihoodConfig,
) -> Result<f64> {
    let est_params = est.params()?;
    let ll_true = log_likelihood(pair, true_params, cfg)?.ll;
    let ll_est = log_likelihood(pair, est_params, cfg)?.ll;
    relative_gap(ll_est, ll_true)
}

/// Polishes `start` by exhaustive search on a log-spaced grid spanning
/// `[value/span, value*span]` in both parameters, `steps` points per axis.
/// Returns the best parameters found (ties keep the earlier grid point)
/// and their log-likelihood. This is a diagnostic helper, not an
/// optimizer: one grid pass, no iteration.
pub fn refine_by_grid(
    pair: &ImagePair,
    start: NoiseParams,
    cfg: &LikelihoodConfig,
    steps: usize,
    span: f64,
) -> Result<(NoiseParams, f64)> {
    if steps < 1 || !(span.is_finite() && span > 1.0) {
        return Err(Error::InvalidLikelihoodConfig {
            reason: format!("grid refinement needs steps >= 1 and span > 1, got {steps}, {span}"),
        });
    }
    let axis = |center: f64| -> Vec<f64> {
        if steps == 1 {
            return vec![center];
        }
        let lo = (center / span).ln();
        let hi = (center * span).ln();
        (0..steps)
            .map(|i| (lo + (hi - lo) * i as f64 / (steps - 1) as f64).exp())
            .collect()
    };
    let mut best = (start, log_likelihood(pair, start, cfg)?.ll);
    for &a in &axis(start.a()) {
        for &b in &axis(start.b()) {
            let candidate = NoiseParams::new(a, b)?;
            let ll = log_likelihood(pair, candidate, cfg)?.ll;
            if ll > best.1 {
                best = (candidate, ll);
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::buffer::{ImageBuffer, ImagePair};
    use crate::sim::{synthesize, Seed};

    fn pair_from(clean: Vec<f64>, noisy: Vec<f64>) -> ImagePair {
        let w = clean.len() as u32;
        ImagePair::new(
            ImageBuffer::new(w, 1, clean).unwrap(),
            ImageBuffer::new(w, 1, noisy).unwrap(),
            Default::default(),
        )
        .unwrap()
    }

    fn params(a: f64, b: f64) -> NoiseParams {
        NoiseParams::new(a, b).unwrap()
    }

    /// Straightforward probability-domain evaluation (no log-sum-exp, naive
    /// factorials), usable for small rates; the production path must agree.
    fn brute_force_ll(pair: &ImagePair, a: f64, b: f64, k_terms: usize) -> f64 {
        let mut total = 0.0;
        for (&x, &y) in pair
            .clean()
            .pixels()
            .iter()
            .zip(pair.noisy().pixels().iter())
        {
            let rate = a * x;
            let mut p = 0.0f64;
            let mut factorial = 1.0f64;
            for k in 0..=k_terms {
                if k > 0 {
                    factorial *= k as f64;
                }
                let pois = (-rate).exp() * rate.powi(k as i32) / factorial;
                let dev = y - k as f64 / a;
                let gauss =
                    (-dev * dev / (2.0 * b * b)).exp() / (b * (2.0 * std::f64::consts::PI).sqrt());
                p += pois * gauss;
            }
            total += p.ln();
        }
        total
    }

    #[test]
    fn config_validation() {
        assert!(LikelihoodConfig::new(1e-12, 10_000).is_ok());
        assert!(LikelihoodConfig::new(0.0, 10).is_err());
        assert!(LikelihoodConfig::new(1.0, 10).is_err());
        assert!(LikelihoodConfig::new(-0.1, 10).is_err());
        assert!(LikelihoodConfig::new(1e-12, 0).is_err());
    }

    #[test]
    fn zero_intensity_pixel_is_a_single_gaussian_term() {
        // x = 0, y = 0, b = 0.1: LL = -ln(0.1 * sqrt(2 pi)) ~ 1.38365.
        let pair = pair_from(vec![0.0], vec![0.0]);
        let ll = log_likelihood(&pair, params(5.0, 0.1), &LikelihoodConfig::default()).unwrap();
        let expected = -(0.1 * (2.0 * std::f64::consts::PI).sqrt()).ln();
        assert!((ll.ll - expected).abs() < 1e-12, "{} vs {expected}", ll.ll);
        assert!((ll.ll - 1.38364655978937).abs() < 1e-11);
        assert_eq!(ll.pixels, 1);
    }

    #[test]
    fn rejects_zero_read_noise() {
        let pair = pair_from(vec![0.5], vec![0.5]);
        let err = log_likelihood(&pair, params(5.0, 0.0), &LikelihoodConfig::default());
        assert!(matches!(err, Err(Error::DegenerateLikelihood { .. })));
    }

    #[test]
    fn matches_brute_force_on_small_rates() {
        let clean = vec![0.0, 0.1, 0.25, 0.5, 0.9, 1.0];
        let noisy = vec![0.02, 0.15, 0.2, 0.55, 0.8, 1.1];
        let pair = pair_from(clean, noisy);
        for &(a, b) in &[(2.0, 0.2), (5.0, 0.1), (1.0, 0.15)] {
            let fast = log_likelihood(&pair, params(a, b), &LikelihoodConfig::default())
                .unwrap()
                .ll;
            let slow = brute_force_ll(&pair, a, b, 80);
            assert!(
                (fast - slow).abs() <= 1e-10 * slow.abs().max(1.0),
                "a={a} b={b}: {fast} vs {slow}"
            );
        }
    }

    #[test]
    fn pixel_additivity_is_exact() {
        let p1 = pair_from(vec![0.3], vec![0.35]);
        let p2 = pair_from(vec![0.7], vec![0.6]);
        let p12 = pair_from(vec![0.3, 0.7], vec![0.35, 0.6]);
        let cfg = LikelihoodConfig::default();
        let np = params(8.0, 0.07);
        let ll1 = log_likelihood(&p1, np, &cfg).unwrap().ll;
        let ll2 = log_likelihood(&p2, np, &cfg).unwrap().ll;
        let ll12 = log_likelihood(&p12, np, &cfg).unwrap().ll;
        assert_eq!(ll12, ll1 + ll2);
    }

    #[test]
    fn truncation_index_honors_floor_and_growth() {
        let cfg = LikelihoodConfig::default();
        // Tiny rate still sums at least 9 terms (floor of 8).
        assert!(k_max_for_rate(1e-6, &cfg, &[]) >= 8);
        // Large rate: at least mean + 10 sigma.
        let km = k_max_for_rate(100.0, &cfg, &[]);
        assert!(km >= 201, "k_max = {km}");
        // Bounded tail really is below the requested mass.
        assert!(poisson_tail_bound(100.0, km, &[]) < cfg.tail_mass);
        // Cap wins when it is smaller.
        let capped = LikelihoodConfig::new(1e-12, 50).unwrap();
        assert_eq!(k_max_for_rate(100.0, &capped, &[]), 50);
    }

    #[test]
    fn tightening_tail_mass_barely_moves_the_result() {
        let clean = ImageBuffer::from_fn(48, 48, |x, y| {
            (((x * 7 + y * 3) % 96) as f64 / 95.0 * 255.0).round() / 255.0
        })
        .unwrap();
        let np = params(40.0, 0.05);
        let pair = synthesize(&clean, np, Seed(4)).unwrap();
        let loose = LikelihoodConfig::new(1e-12, 10_000).unwrap();
        let tight = LikelihoodConfig::new(1e-18, 10_000).unwrap();
        let ll_loose = log_likelihood(&pair, np, &loose).unwrap();
        let ll_tight = log_likelihood(&pair, np, &tight).unwrap();
        assert!(
            (ll_loose.ll - ll_tight.ll).abs() < 1e-6,
            "{} vs {}",
            ll_loose.ll,
            ll_tight.ll
        );
        // The tighter bound may only extend the truncation.
        assert!(ll_tight.k_max_max >= ll_loose.k_max_max);
    }

    #[test]
    fn ll_is_unimodal_in_b_near_truth() {
        let clean = ImageBuffer::constant(128, 128, 0.5).unwrap();
        let np = params(10.0, 0.08);
        let pair = synthesize(&clean, np, Seed(21)).unwrap();
        let cfg = LikelihoodConfig::default();
        let grid: Vec<f64> = (0..13).map(|i| 0.05 + 0.005 * i as f64).collect();
        let lls: Vec<f64> = grid
            .iter()
            .map(|&b| log_likelihood(&pair, params(10.0, b), &cfg).unwrap().ll)
            .collect();
        let argmax = lls
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        // Maximum close to the true b = 0.08 (grid index 6), one step slack.
        assert!(
            (grid[argmax] - 0.08).abs() <= 0.0051,
            "argmax at b = {}",
            grid[argmax]
        );
        // Rises before the peak, falls after: unimodal on this grid.
        for i in 1..=argmax {
            assert!(lls[i] >= lls[i - 1], "not rising at {i}");
        }
        for i in argmax + 1..lls.len() {
            assert!(lls[i] <= lls[i - 1], "not falling at {i}");
        }
    }

    #[test]
    fn relative_gap_arithmetic() {
        assert_eq!(relative_gap(-110.0, -100.0).unwrap(), 0.1);
        assert_eq!(relative_gap(-100.0, -100.0).unwrap(), 0.0);
        assert!(matches!(
            relative_gap(-1.0, 0.0),
            Err(Error::ZeroReferenceLikelihood)
        ));
    }

    #[test]
    fn gap_vanishes_when_estimate_equals_truth() {
        use crate::estimators::{Diagnostics, Method};
        let clean = ImageBuffer::constant(32, 32, 0.4).unwrap();
        let np = params(20.0, 0.05);
        let pair = synthesize(&clean, np, Seed(9)).unwrap();
        let est = Estimate {
            method: Method::Cumulant,
            a_inv: 1.0 / 20.0,
            b_sq: 0.0025,
            diagnostics: Diagnostics {
                discriminant: None,
                clamped_a_inv: false,
                clamped_b_sq: false,
                residual: 0.0,
            },
        };
        let gap = relative_ll_gap(&pair, np, &est, &LikelihoodConfig::default()).unwrap();
        assert_eq!(gap, 0.0);
    }

    #[test]
    fn grid_refinement_never_worsens() {
        let clean = ImageBuffer::constant(48, 48, 0.5).unwrap();
        let truth = params(12.0, 0.06);
        let pair = synthesize(&clean, truth, Seed(30)).unwrap();
        let cfg = LikelihoodConfig::default();
        // Start well off the truth.
        let start = params(20.0, 0.1);
        let ll_start = log_likelihood(&pair, start, &cfg).unwrap().ll;
        let (refined, ll_refined) = refine_by_grid(&pair, start, &cfg, 7, 3.0).unwrap();
        assert!(ll_refined >= ll_start);
        // The refined point should land nearer the truth than the start.
        let dist = |p: NoiseParams| {
            ((p.a().ln() - truth.a().ln()).powi(2) + (p.b().ln() - truth.b().ln()).powi(2)).sqrt()
        };
        assert!(dist(refined) <= dist(start), "refinement moved away");
    }
}
