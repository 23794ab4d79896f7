//! Poisson-Gaussian image-noise modeling from paired samples.
//!
//! Raw sensor data mixes two noise sources: photon shot noise, which grows
//! with signal level, and read noise, which does not. With a normalized
//! clean intensity `x` in `[0, 1]`, the observed pixel is modeled as
//!
//! ```text
//! y = P(a * x) / a + b * z,      z ~ N(0, 1)
//! ```
//!
//! where `P` is a Poisson draw, `a > 0` scales intensities to expected
//! photon counts, and `b >= 0` is the read-noise standard deviation. Then
//! `E[y] = x` and `Var[y] = x / a + b^2`, so `(1/a, b^2)` are the slope and
//! intercept of the variance line — the quantities every estimator here
//! reports.
//!
//! Given a *pair* of registered images — one noise-free, one noisy — the
//! crate provides:
//!
//! * [`synthesize`] — forward simulation with deterministic, seedable,
//!   order-independent randomness ([`rng::StreamRng`]).
//! * [`estimate_cumulant`] — a moment-matching estimator that solves for
//!   `(1/a, b^2)` from the second and third sample cumulants of the noisy
//!   image and the raw moments of the clean one.
//! * [`estimate_var`] — a baseline that regresses per-intensity-level
//!   empirical variances on intensity.
//! * [`log_likelihood`] — the exact mixed Poisson-Gaussian likelihood with
//!   a controlled truncation bound, for scoring estimates.
//! * [`eval`] — parameter sweeps over images, seeds and `(a, b)` grids,
//!   with outlier-robust summaries and deterministic report files.
//! * [`io`] — PGM/PNG loading, a lossless float container, and pair
//!   persistence.
//!
//! # Example
//!
//! ```
//! use pgnoise::{estimate_cumulant, synthesize, NoiseParams, Seed};
//! use pgnoise::synthetic::synthetic_image;
//!
//! let clean = synthetic_image(64, 48, 7).unwrap();
//! let truth = NoiseParams::new(20.0, 0.05).unwrap();
//! let pair = synthesize(&clean, truth, Seed(1)).unwrap();
//!
//! let est = estimate_cumulant(&pair).unwrap();
//! assert!((est.a_inv - truth.a_inv()).abs() < 0.05);
//! assert!((est.b_sq - truth.b_sq()).abs() < 0.01);
//! ```

pub mod buffer;
pub mod cumulants;
pub mod error;
pub mod estimators;
pub mod eval;
pub mod io;
mod kahan;
pub mod likelihood;
pub mod rng;
pub mod sim;
pub mod stats;
pub mod synthetic;

pub use buffer::{ImageBuffer, ImagePair, PairMeta};
pub use error::{Error, Result};
pub use estimators::{estimate_cumulant, estimate_var, Estimate, Method, VarConfig};
pub use likelihood::{log_likelihood, relative_ll_gap, LikelihoodConfig, LogLik};
pub use sim::{synthesize, NoiseParams, Seed};
