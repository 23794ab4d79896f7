//! Forward Poisson-Gaussian noise synthesis.
//!
//! The observation model for a noise-free intensity `x` in `[0, 1]` is
//!
//! ```text
//! y = k / a + b * z,   k ~ Poisson(a * x),   z ~ N(0, 1)
//! ```
//!
//! so `a` scales the photon count (larger `a` = more photons = less shot
//! noise) and `b` is the standard deviation of additive read noise. The
//! first two moments are `E[y] = x` and `Var[y] = x / a + b^2`. Estimators
//! in this crate report the pair `(1/a, b^2)`, the slope and intercept of
//! that variance line.

use crate::buffer::{ImageBuffer, ImagePair, PairMeta};
use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// Noise model parameters: photon scale `a > 0` and read-noise standard
/// deviation `b >= 0`, both finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    a: f64,
    b: f64,
}

impl NoiseParams {
    /// Validates and wraps `(a, b)`.
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !a.is_finite() || a <= 0.0 {
            return Err(Error::InvalidParams {
                reason: format!("a must be finite and > 0, got {a}"),
            });
        }
        if !b.is_finite() || b < 0.0 {
            return Err(Error::InvalidParams {
                reason: format!("b must be finite and >= 0, got {b}"),
            });
        }
        Ok(NoiseParams { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Inverse photon scale `1/a`, the slope of the variance line.
    pub fn a_inv(&self) -> f64 {
        1.0 / self.a
    }

    /// Read-noise variance `b^2`, the intercept of the variance line.
    pub fn b_sq(&self) -> f64 {
        self.b * self.b
    }

    /// Mean and variance of a noisy observation of intensity `x`:
    /// `(x, x / a + b^2)`.
    pub fn theoretical_moments(&self, x: f64) -> (f64, f64) {
        (x, x / self.a + self.b * self.b)
    }
}

/// RNG seed for one synthesis run. Identical seeds (with identical clean
/// image and parameters) reproduce the noisy image bit for bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Seed(pub u64);

impl From<u64> for Seed {
    fn from(value: u64) -> Self {
        Seed(value)
    }
}

/// Draws one noisy realization of `clean` under `params`.
///
/// Every pixel uses its own random substream derived from
/// `(seed, pixel index)`, so the output is independent of traversal order
/// and thread count, and two calls with equal inputs are bit-identical.
/// Samples are *not* clipped: read noise can push values below 0 or
/// above 1.
///
/// Errors when any clean intensity lies outside `[0, 1]`.
pub fn synthesize(clean: &ImageBuffer, params: NoiseParams, seed: Seed) -> Result<ImagePair> {
    clean.check_clean_range()?;
    let a = params.a();
    let b = params.b();
    let mut noisy = Vec::with_capacity(clean.len());
    for (index, &x) in clean.pixels().iter().enumerate() {
        noisy.push(sample_pixel(x, a, b, seed, index as u64));
    }
    let noisy = ImageBuffer::new(clean.width(), clean.height(), noisy)?;
    ImagePair::new(
        clean.clone(),
        noisy,
        PairMeta {
            source: None,
            seed: Some(seed.0),
            params: Some(params),
        },
    )
}

/// One noisy sample for intensity `x` at `pixel_index`.
///
/// The Poisson draw consumes the pixel's substream first, then the normal
/// draw; a zero `b` skips the normal draw entirely. `x == 0` with `b == 0`
/// therefore yields exactly 0.
fn sample_pixel(x: f64, a: f64, b: f64, seed: Seed, pixel_index: u64) -> f64 {
    let mut rng = StreamRng::substream(seed.0, pixel_index);
    let counts = rng.poisson(a * x) as f64;
    let read = if b > 0.0 {
        b * rng.standard_normal()
    } else {
        0.0
    };
    counts / a + read
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(a: f64, b: f64) -> NoiseParams {
        NoiseParams::new(a, b).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(NoiseParams::new(0.0, 0.1).is_err());
        assert!(NoiseParams::new(-1.0, 0.1).is_err());
        assert!(NoiseParams::new(f64::NAN, 0.1).is_err());
        assert!(NoiseParams::new(1.0, -0.1).is_err());
        assert!(NoiseParams::new(1.0, f64::INFINITY).is_err());
        assert!(NoiseParams::new(1.0, 0.0).is_ok());
    }

    #[test]
    fn theoretical_moments_known_values() {
        // Unit intensity at a = 1, b = 0: mean 1, variance 1 (pure Poisson).
        assert_eq!(params(1.0, 0.0).theoretical_moments(1.0), (1.0, 1.0));
        // x = 0.5, a = 20, b = 0.05: variance 0.5/20 + 0.0025 = 0.0275.
        let (mean, var) = params(20.0, 0.05).theoretical_moments(0.5);
        assert_eq!(mean, 0.5);
        assert!((var - 0.0275).abs() < 1e-15);
    }

    #[test]
    fn zero_intensity_zero_read_noise_is_exactly_zero() {
        let clean = ImageBuffer::constant(16, 16, 0.0).unwrap();
        let pair = synthesize(&clean, params(5.0, 0.0), Seed(3)).unwrap();
        assert!(pair.noisy().pixels().iter().all(|&y| y == 0.0));
    }

    #[test]
    fn synthesis_is_reproducible_bit_for_bit() {
        let clean = ImageBuffer::from_fn(32, 24, |x, y| ((x + y) % 17) as f64 / 16.0).unwrap();
        let p = params(12.0, 0.07);
        let one = synthesize(&clean, p, Seed(99)).unwrap();
        let two = synthesize(&clean, p, Seed(99)).unwrap();
        assert_eq!(one.noisy().pixels(), two.noisy().pixels());
        let other_seed = synthesize(&clean, p, Seed(100)).unwrap();
        assert_ne!(one.noisy().pixels(), other_seed.noisy().pixels());
    }

    /// Each pixel's value is a function of (seed, pixel index) alone, so a
    /// pixel recomputed in isolation matches the full-image pass.
    #[test]
    fn pixels_are_independent_substreams() {
        let clean = ImageBuffer::from_fn(8, 8, |x, y| (x * 8 + y) as f64 / 64.0).unwrap();
        let p = params(30.0, 0.02);
        let pair = synthesize(&clean, p, Seed(7)).unwrap();
        for index in [0usize, 13, 63] {
            let x = clean.pixels()[index];
            let expected = sample_pixel(x, p.a(), p.b(), Seed(7), index as u64);
            assert_eq!(pair.noisy().pixels()[index], expected);
        }
    }

    #[test]
    fn rejects_out_of_range_clean() {
        let clean = ImageBuffer::new(2, 1, vec![0.5, 1.2]).unwrap();
        let err = synthesize(&clean, params(10.0, 0.1), Seed(0)).unwrap_err();
        assert!(matches!(err, Error::CleanOutOfRange { index: 1, .. }));
    }

    /// Monte-Carlo check of the first two moments at x = 0.5, a = 20,
    /// b = 0.05: expected mean 0.5 and variance 0.0275.
    #[test]
    fn sample_moments_match_theory() {
        let n = 1_000_000u32;
        let clean = ImageBuffer::constant(1000, 1000, 0.5).unwrap();
        let p = params(20.0, 0.05);
        let pair = synthesize(&clean, p, Seed(41)).unwrap();
        let values = pair.noisy().pixels();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n as f64;
        let (exp_mean, exp_var) = p.theoretical_moments(0.5);
        let mean_se = (exp_var / n as f64).sqrt();
        assert!(
            (mean - exp_mean).abs() < 5.0 * mean_se,
            "mean {mean} vs {exp_mean}"
        );
        // Var(sample variance) ~ (2 sigma^4 + kappa4)/n where the excess
        // kurtosis term for this model is x/a^3.
        let kappa4 = 0.5 / p.a().powi(3);
        let var_se = ((2.0 * exp_var * exp_var + kappa4) / n as f64).sqrt();
        assert!(
            (var - exp_var).abs() < 5.0 * var_se,
            "var {var} vs {exp_var}"
        );
    }

    /// With b = 0 the third central moment of y is x / a^2 (scaled Poisson
    /// skewness).
    #[test]
    fn third_moment_matches_scaled_poisson() {
        let x = 0.4;
        let a = 8.0;
        let clean = ImageBuffer::constant(1000, 500, x).unwrap();
        let pair = synthesize(&clean, params(a, 0.0), Seed(77)).unwrap();
        let values = pair.noisy().pixels();
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let m3 = values.iter().map(|y| (y - mean).powi(3)).sum::<f64>() / n;
        let expected = x / (a * a);
        // Loose 5-sigma-style bound via the empirical spread of cubed
        // deviations.
        let spread = values
            .iter()
            .map(|y| ((y - mean).powi(3) - m3).powi(2))
            .sum::<f64>()
            / n;
        let se = (spread / n).sqrt();
        assert!(
            (m3 - expected).abs() < 5.0 * se,
            "m3 {m3} vs {expected} (se {se})"
        );
    }
}
