//! In-memory image types shared by every module.
//!
//! Intensities are stored as `f64` in row-major order. Noise-free images are
//! normalized to `[0, 1]`; noisy realizations may lie outside that range
//! (negative Gaussian excursions are never clipped).

use crate::error::{Error, Result};
use crate::sim::NoiseParams;

/// A single grayscale image: row-major `f64` samples.
///
/// Construction checks that the dimensions are non-degenerate, that the
/// sample count matches `width * height`, and that every sample is finite.
/// No range restriction is imposed here; whether values must lie in `[0, 1]`
/// is a property of *noise-free* inputs and is enforced by the operations
/// that require it.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    width: u32,
    height: u32,
    data: Vec<f64>,
}

impl ImageBuffer {
    /// Wraps `data` (row-major, length `width * height`) as an image.
    pub fn new(width: u32, height: u32, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyImage { width, height });
        }
        let expected = width as usize * height as usize;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                width,
                height,
                len: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample { index });
        }
        Ok(ImageBuffer {
            width,
            height,
            data,
        })
    }

    /// An image filled with a single intensity.
    pub fn constant(width: u32, height: u32, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width as usize * height as usize])
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Number of pixels (`width * height`).
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Row-major samples.
    pub fn pixels(&self) -> &[f64] {
        &self.data
    }

    /// Sample at column `x`, row `y`. Panics when out of bounds.
    pub fn get(&self, x: u32, y: u32) -> f64 {
        assert!(x < self.width && y < self.height, "pixel out of bounds");
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.data
    }

    /// Same shape as `other`?
    pub fn same_shape(&self, other: &ImageBuffer) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Errors unless every sample lies in `[0, 1]`, the contract for
    /// noise-free inputs.
    pub fn check_clean_range(&self) -> Result<()> {
        for (index, &value) in self.data.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::CleanOutOfRange { index, value });
            }
        }
        Ok(())
    }
}

/// Provenance of a synthesized pair, carried for reproducibility.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairMeta {
    /// Where the clean image came from, if loaded from disk.
    pub source: Option<String>,
    /// Seed used to synthesize the noisy half.
    pub seed: Option<u64>,
    /// Parameters used to synthesize the noisy half.
    pub params: Option<NoiseParams>,
}

/// A noise-free image and one noisy realization of it, same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePair {
    clean: ImageBuffer,
    noisy: ImageBuffer,
    meta: PairMeta,
}

impl ImagePair {
    /// Pairs `clean` with `noisy`, rejecting shape mismatches.
    pub fn new(clean: ImageBuffer, noisy: ImageBuffer, meta: PairMeta) -> Result<Self> {
        if !clean.same_shape(&noisy) {
            return Err(Error::PairShapeMismatch {
                clean_width: clean.width(),
                clean_height: clean.height(),
                noisy_width: noisy.width(),
                noisy_height: noisy.height(),
            });
        }
        Ok(ImagePair { clean, noisy, meta })
    }

    pub fn clean(&self) -> &ImageBuffer {
        &self.clean
    }

    pub fn noisy(&self) -> &ImageBuffer {
        &self.noisy
    }

    pub fn meta(&self) -> &PairMeta {
        &self.meta
    }

    /// Number of pixels shared by both halves.
    pub fn len(&self) -> usize {
        self.clean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clean.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_validates_dimensions() {
        assert!(matches!(
            ImageBuffer::new(0, 3, vec![]),
            Err(Error::EmptyImage { .. })
        ));
        assert!(matches!(
            ImageBuffer::new(2, 2, vec![0.0; 3]),
            Err(Error::DimensionMismatch { len: 3, .. })
        ));
    }

    #[test]
    fn new_rejects_non_finite() {
        let err = ImageBuffer::new(2, 1, vec![0.5, f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::NonFiniteSample { index: 1 }));
    }

    #[test]
    fn get_is_row_major() {
        let img = ImageBuffer::new(3, 2, vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5]).unwrap();
        assert_eq!(img.get(0, 0), 0.0);
        assert_eq!(img.get(2, 0), 0.2);
        assert_eq!(img.get(0, 1), 0.3);
        assert_eq!(img.get(2, 1), 0.5);
    }

    #[test]
    fn clean_range_check_flags_out_of_range() {
        let img = ImageBuffer::new(2, 1, vec![0.5, 1.5]).unwrap();
        let err = img.check_clean_range().unwrap_err();
        assert!(matches!(err, Error::CleanOutOfRange { index: 1, .. }));
        let ok = ImageBuffer::new(2, 1, vec![0.0, 1.0]).unwrap();
        assert!(ok.check_clean_range().is_ok());
    }

    #[test]
    fn pair_rejects_shape_mismatch() {
        let clean = ImageBuffer::constant(2, 2, 0.5).unwrap();
        let noisy = ImageBuffer::constant(2, 3, 0.5).unwrap();
        let err = ImagePair::new(clean, noisy, PairMeta::default()).unwrap_err();
        assert!(matches!(err, Error::PairShapeMismatch { .. }));
    }
}
