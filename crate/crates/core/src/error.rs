//! Crate-wide error type.

use std::path::PathBuf;

use crate::estimators::Estimate;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong in this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Underlying filesystem failure while touching `path`.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// The file does not start with a magic number we understand.
    #[error("unrecognized image format for {path}")]
    UnrecognizedFormat { path: PathBuf },

    /// A recognized container that violates its own format rules.
    #[error("malformed {format} data: {reason}")]
    Malformed {
        format: &'static str,
        reason: String,
    },

    /// Color input was given but no grayscale conversion was requested.
    #[error("color image given without a grayscale conversion mode; pass a luma or channel mode")]
    ColorWithoutConversion,

    /// Declared dimensions do not match the number of samples.
    #[error("dimensions {width}x{height} do not match {len} samples")]
    DimensionMismatch { width: u32, height: u32, len: usize },

    /// Width or height of zero.
    #[error("image dimensions must be at least 1x1 (got {width}x{height})")]
    EmptyImage { width: u32, height: u32 },

    /// Clean and noisy buffers of a pair have different shapes.
    #[error("pair shape mismatch: clean {clean_width}x{clean_height}, noisy {noisy_width}x{noisy_height}")]
    PairShapeMismatch {
        clean_width: u32,
        clean_height: u32,
        noisy_width: u32,
        noisy_height: u32,
    },

    /// A NaN or infinity where a finite sample is required.
    #[error("non-finite sample at index {index}")]
    NonFiniteSample { index: usize },

    /// A noise-free intensity outside the normalized range.
    #[error("clean intensity {value} at index {index} lies outside [0, 1]")]
    CleanOutOfRange { index: usize, value: f64 },

    /// Rejected noise-model parameters.
    #[error("invalid noise parameters: {reason}")]
    InvalidParams { reason: String },

    /// An operation that needs at least `needed` samples got fewer.
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    /// The cumulant quadratic has no real solution. `fallback` carries the
    /// clamped boundary estimate (discriminant treated as zero) so callers
    /// that must produce a number still can, clearly flagged.
    #[error("cumulant system has no real root (discriminant {discriminant:e})")]
    NoRealRoot {
        discriminant: f64,
        fallback: Estimate,
    },

    /// Clean image carries no usable signal (all-zero intensities).
    #[error("degenerate clean image: zero mean intensity")]
    DegenerateClean,

    /// The variance-fit design matrix has rank < 2.
    #[error(
        "variance fit is rank-deficient: {occupied} occupied intensity level(s), need at least 2"
    )]
    RankDeficient { occupied: usize },

    /// Rejected likelihood evaluation settings.
    #[error("invalid likelihood configuration: {reason}")]
    InvalidLikelihoodConfig { reason: String },

    /// Likelihood evaluation needs strictly positive `a` and `b`.
    #[error("likelihood requires a > 0 and b > 0 (got a = {a}, b = {b})")]
    DegenerateLikelihood { a: f64, b: f64 },

    /// An estimate whose (a_inv, b_sq) cannot be mapped back to (a, b) > 0.
    #[error("estimate not usable as noise parameters: {reason}")]
    EstimateNotInvertible { reason: String },

    /// Relative likelihood gap is undefined when the reference is zero.
    #[error("reference log-likelihood is zero; relative gap undefined")]
    ZeroReferenceLikelihood,

    /// Rejected sweep settings.
    #[error("invalid sweep configuration: {reason}")]
    InvalidSweepConfig { reason: String },

    /// A summary was requested over an empty selection of records.
    #[error("no records to summarize for the requested method/parameter")]
    EmptySelection,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(format: &'static str, reason: impl Into<String>) -> Self {
        Error::Malformed {
            format,
            reason: reason.into(),
        }
    }
}
