//! Deterministic random number generation with per-pixel substreams.
//!
//! Reproducibility contract: every sampled value is a pure function of
//! `(seed, stream index)` plus the draw's position within its stream. The
//! generator is SplitMix64 (Steele, Lea & Flood's 64-bit mix), chosen because
//! it is fully specified by integer arithmetic — identical output on every
//! platform — and cheap enough to re-derive per pixel. Each pixel of an image
//! gets its own substream, so results do not depend on pixel traversal order
//! or on how work is split across threads.
//!
//! Sampling algorithms are fixed and documented here:
//! * Poisson, rate < 10: Knuth-style inversion by multiplying uniforms.
//! * Poisson, rate >= 10: transformed rejection with squeeze (Hormann's
//!   PTRS), the same scheme used by mainstream numerical libraries.
//! * Standard normal: Marsaglia's polar method.

use statrs::function::gamma::ln_gamma;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Rates below this use inversion; at or above it, transformed rejection.
const POISSON_REJECTION_THRESHOLD: f64 = 10.0;

/// SplitMix64 finalizer: a full-avalanche 64-bit mix.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamRng {
    state: u64,
}

impl StreamRng {
    /// Stream for the given raw state. Prefer [`StreamRng::substream`] so
    /// that nearby seeds or indices do not yield correlated streams.
    pub fn from_state(state: u64) -> Self {
        StreamRng { state }
    }

    /// Derives the substream for `(seed, index)`.
    ///
    /// Both inputs pass through the avalanche mix, so consecutive indices
    /// (adjacent pixels) or consecutive seeds land on unrelated states.
    pub fn substream(seed: u64, index: u64) -> Self {
        let state = mix64(
            mix64(seed ^ GOLDEN_GAMMA).wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9)),
        );
        StreamRng { state }
    }

    /// Next 64 uniformly distributed bits (SplitMix64 step).
    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform f64 in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform f64 in `(0, 1]`; used where a zero would break a product
    /// or a logarithm.
    #[inline]
    fn next_f64_open_low(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// One Poisson draw with the given rate (`rate >= 0`, finite).
    ///
    /// `rate == 0` returns 0 without consuming randomness.
    pub fn poisson(&mut self, rate: f64) -> u64 {
        debug_assert!(
            rate.is_finite() && rate >= 0.0,
            "invalid Poisson rate {rate}"
        );
        if rate == 0.0 {
            0
        } else if rate < POISSON_REJECTION_THRESHOLD {
            self.poisson_inversion(rate)
        } else {
            self.poisson_ptrs(rate)
        }
    }

    /// Knuth's inversion: multiply uniforms until the product drops below
    /// `exp(-rate)`. Expected iterations are `rate + 1`, fine for small rates.
    fn poisson_inversion(&mut self, rate: f64) -> u64 {
        let limit = (-rate).exp();
        let mut k: u64 = 0;
        let mut product = 1.0f64;
        loop {
            product *= self.next_f64_open_low();
            if product <= limit {
                return k;
            }
            k += 1;
        }
    }

    /// Hormann's PTRS transformed rejection with squeeze, valid for
    /// `rate >= 10`. Acceptance probability is high (one or two attempts on
    /// average) and the draw is exact, not approximate.
    fn poisson_ptrs(&mut self, rate: f64) -> u64 {
        let slam = rate.sqrt();
        let loglam = rate.ln();
        let b = 0.931 + 2.53 * slam;
        let a = -0.059 + 0.02483 * b;
        let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        let v_r = 0.9277 - 3.6224 / (b - 2.0);
        loop {
            let u = self.next_f64() - 0.5;
            let v = self.next_f64();
            let us = 0.5 - u.abs();
            let k = ((2.0 * a / us + b) * u + rate + 0.43).floor();
            if us >= 0.07 && v <= v_r {
                return k as u64;
            }
            if k < 0.0 || (us < 0.013 && v > us) {
                continue;
            }
            if v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln()
                <= k * loglam - rate - ln_gamma(k + 1.0)
            {
                return k as u64;
            }
        }
    }

    /// One standard normal draw (Marsaglia's polar method).
    pub fn standard_normal(&mut self) -> f64 {
        loop {
            let u = 2.0 * self.next_f64() - 1.0;
            let v = 2.0 * self.next_f64() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                return u * (-2.0 * s.ln() / s).sqrt();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substream_is_deterministic() {
        let mut a = StreamRng::substream(42, 7);
        let mut b = StreamRng::substream(42, 7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn substreams_differ_across_indices_and_seeds() {
        let first: Vec<u64> = {
            let mut r = StreamRng::substream(42, 0);
            (0..8).map(|_| r.next_u64()).collect()
        };
        let next_index: Vec<u64> = {
            let mut r = StreamRng::substream(42, 1);
            (0..8).map(|_| r.next_u64()).collect()
        };
        let next_seed: Vec<u64> = {
            let mut r = StreamRng::substream(43, 0);
            (0..8).map(|_| r.next_u64()).collect()
        };
        assert_ne!(first, next_index);
        assert_ne!(first, next_seed);
        assert_ne!(next_index, next_seed);
    }

    #[test]
    fn uniforms_stay_in_unit_interval() {
        let mut rng = StreamRng::substream(1, 1);
        for _ in 0..10_000 {
            let u = rng.next_f64();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn poisson_zero_rate_is_zero() {
        let mut rng = StreamRng::substream(5, 0);
        for _ in 0..100 {
            assert_eq!(rng.poisson(0.0), 0);
        }
    }

    /// Sample moments of both Poisson regimes against theory. With n draws
    /// the standard error of the mean is sqrt(rate/n); we allow 5 of them.
    #[test]
    fn poisson_moments_match_theory_in_both_regimes() {
        for &(rate, seed) in &[(4.0f64, 11u64), (50.0, 13)] {
            let n = 200_000u64;
            let mut rng = StreamRng::substream(seed, 0);
            let mut sum = 0.0f64;
            let mut sum_sq = 0.0f64;
            for _ in 0..n {
                let k = rng.poisson(rate) as f64;
                sum += k;
                sum_sq += k * k;
            }
            let mean = sum / n as f64;
            let var = sum_sq / n as f64 - mean * mean;
            let mean_se = (rate / n as f64).sqrt();
            assert!(
                (mean - rate).abs() < 5.0 * mean_se,
                "rate {rate}: mean {mean} vs {rate} (se {mean_se})"
            );
            // Var(sample variance) ~ (kappa4 + 2 kappa2^2)/n with
            // kappa4 = rate for Poisson.
            let var_se = ((rate + 2.0 * rate * rate) / n as f64).sqrt();
            assert!(
                (var - rate).abs() < 5.0 * var_se,
                "rate {rate}: var {var} vs {rate} (se {var_se})"
            );
        }
    }

    /// Poisson skewness is rate^(-1/2); checked in the rejection regime
    /// where the sampler shape matters most.
    #[test]
    fn poisson_skewness_matches_theory() {
        let rate = 25.0f64;
        let n = 400_000u64;
        let mut rng = StreamRng::substream(17, 0);
        let mut draws = Vec::with_capacity(n as usize);
        for _ in 0..n {
            draws.push(rng.poisson(rate) as f64);
        }
        let mean = draws.iter().sum::<f64>() / n as f64;
        let m2 = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        let m3 = draws.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n as f64;
        let skew = m3 / m2.powf(1.5);
        let expected = 1.0 / rate.sqrt();
        // SE of sample skewness is roughly sqrt(6/n).
        let se = (6.0 / n as f64).sqrt();
        assert!(
            (skew - expected).abs() < 5.0 * se,
            "skew {skew} vs {expected}"
        );
    }

    #[test]
    fn normal_moments_match_theory() {
        let n = 200_000u64;
        let mut rng = StreamRng::substream(23, 0);
        let mut sum = 0.0f64;
        let mut sum_sq = 0.0f64;
        for _ in 0..n {
            let z = rng.standard_normal();
            sum += z;
            sum_sq += z * z;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        let mean_se = (1.0 / n as f64).sqrt();
        assert!((mean - 0.0).abs() < 5.0 * mean_se, "mean {mean}");
        let var_se = (2.0 / n as f64).sqrt();
        assert!((var - 1.0).abs() < 5.0 * var_se, "var {var}");
    }
}
