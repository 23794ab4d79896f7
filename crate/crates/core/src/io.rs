//! Image loading and saving.
//!
//! Supported containers:
//!
//! * **Binary PGM (`P5`)** — 8-bit (`maxval <= 255`, one byte per sample)
//!   or 16-bit (`maxval <= 65535`, big-endian pairs). Loading divides by
//!   `maxval` (or by `2^hint - 1` when a bit-depth hint is given), so
//!   `{0, maxval}` maps to `{0, 1}`. Saving quantizes with
//!   `round(clamp(v, 0, 1) * maxval)`.
//! * **`PGFL` float container** — lossless storage for noisy images. A
//!   16-byte header (`b"PGFL"`, u32 LE width, u32 LE height, u32 LE
//!   reserved zero) followed by row-major little-endian `f64` samples.
//!   Round-trips are bit-exact for any finite values.
//! * **PNG** (read only) — 8- or 16-bit grayscale; color inputs are
//!   rejected unless a conversion mode is chosen.
//!
//! Loading sniffs the leading magic bytes, so any supported file can be
//! read regardless of its extension.

use std::fs;
use std::path::Path;

use crate::buffer::{ImageBuffer, ImagePair, PairMeta};
use crate::error::{Error, Result};
use crate::sim::NoiseParams;

const FLOAT_MAGIC: &[u8; 4] = b"PGFL";

/// What to do with color input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColorMode {
    /// Refuse color images (the default: a silent conversion could hide a
    /// data problem).
    Reject,
    /// ITU-R BT.601 luma: `0.299 R + 0.587 G + 0.114 B`.
    Luma,
    /// Keep a single channel (0 = red, 1 = green, 2 = blue).
    Channel(u8),
}

/// Loads a grayscale image, rejecting color input. The optional
/// `bit_depth_hint` overrides the normalization divisor with
/// `2^hint - 1` (otherwise the container's own maximum is used).
pub fn load_image(path: impl AsRef<Path>, bit_depth_hint: Option<u32>) -> Result<ImageBuffer> {
    load_image_with(path, bit_depth_hint, ColorMode::Reject)
}

/// [`load_image`] with an explicit color-handling mode.
pub fn load_image_with(
    path: impl AsRef<Path>,
    bit_depth_hint: Option<u32>,
    color: ColorMode,
) -> Result<ImageBuffer> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(FLOAT_MAGIC) {
        decode_float(&bytes)
    } else if bytes.starts_with(b"P5") {
        decode_pgm(&bytes, bit_depth_hint)
    } else if bytes.starts_with(&[0x89, b'P', b'N', b'G']) {
        decode_png(&bytes, bit_depth_hint, color)
    } else {
        Err(Error::UnrecognizedFormat { path: path.into() })
    }
}

/// Divisor used to normalize integer samples.
fn divisor(native_max: u32, bit_depth_hint: Option<u32>) -> f64 {
    match bit_depth_hint {
        Some(depth) => ((1u64 << depth) - 1) as f64,
        None => native_max as f64,
    }
}

// ---- PGM ----

struct PgmHeader {
    width: u32,
    height: u32,
    maxval: u32,
    raster_offset: usize,
}

/// Parses the `P5` header: magic, then whitespace/comment-separated width,
/// height and maxval, then exactly one whitespace byte before the raster.
fn parse_pgm_header(bytes: &[u8]) -> Result<PgmHeader> {
    let mut pos = 2; // past "P5"
    let mut fields = [0u32; 3];
    for field in fields.iter_mut() {
        skip_whitespace_and_comments(bytes, &mut pos)?;
        *field = read_decimal(bytes, &mut pos)?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => {
            return Err(Error::malformed(
                "pgm",
                "expected single whitespace after maxval",
            ))
        }
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(Error::EmptyImage { width, height });
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::malformed(
            "pgm",
            format!("maxval {maxval} outside 1..=65535"),
        ));
    }
    Ok(PgmHeader {
        width,
        height,
        maxval,
        raster_offset: pos,
    })
}

fn skip_whitespace_and_comments(bytes: &[u8], pos: &mut usize) -> Result<()> {
    loop {
        match bytes.get(*pos) {
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while let Some(&b) = bytes.get(*pos) {
                    *pos += 1;
                    if b == b'\n' {
                        break;
                    }
                }
            }
            Some(_) => return Ok(()),
            None => return Err(Error::malformed("pgm", "truncated header")),
        }
    }
}

fn read_decimal(bytes: &[u8], pos: &mut usize) -> Result<u32> {
    let start = *pos;
    let mut value: u64 = 0;
    while let Some(&b) = bytes.get(*pos) {
        if b.is_ascii_digit() {
            value = value * 10 + (b - b'0') as u64;
            if value > u32::MAX as u64 {
                return Err(Error::malformed("pgm", "header number overflows"));
            }
            *pos += 1;
        } else {
            break;
        }
    }
    if *pos == start {
        return Err(Error::malformed("pgm", "expected a decimal number"));
    }
    Ok(value as u32)
}

fn decode_pgm(bytes: &[u8], bit_depth_hint: Option<u32>) -> Result<ImageBuffer> {
    let header = parse_pgm_header(bytes)?;
    let n = header.width as usize * header.height as usize;
    let raster = &bytes[header.raster_offset..];
    let wide = header.maxval > 255;
    let needed = if wide { 2 * n } else { n };
    if raster.len() < needed {
        return Err(Error::malformed(
            "pgm",
            format!("raster holds {} bytes, need {needed}", raster.len()),
        ));
    }
    let div = divisor(header.maxval, bit_depth_hint);
    let data: Vec<f64> = if wide {
        raster[..needed]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / div)
            .collect()
    } else {
        raster[..needed].iter().map(|&b| b as f64 / div).collect()
    };
    ImageBuffer::new(header.width, header.height, data)
}

/// Output depth for PGM export.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmDepth {
    /// `maxval = 255`, one byte per sample.
    Eight,
    /// `maxval = 65535`, big-endian byte pairs.
    Sixteen,
}

/// Saves as binary PGM, quantizing with `round(clamp(v, 0, 1) * maxval)`.
pub fn save_pgm(img: &ImageBuffer, path: impl AsRef<Path>, depth: PgmDepth) -> Result<()> {
    let path = path.as_ref();
    let maxval: u32 = match depth {
        PgmDepth::Eight => 255,
        PgmDepth::Sixteen => 65535,
    };
    let mut out = Vec::with_capacity(32 + img.len() * 2);
    out.extend_from_slice(format!("P5\n{} {}\n{}\n", img.width(), img.height(), maxval).as_bytes());
    for &v in img.pixels() {
        let q = (v.clamp(0.0, 1.0) * maxval as f64).round() as u32;
        match depth {
            PgmDepth::Eight => out.push(q as u8),
            PgmDepth::Sixteen => out.extend_from_slice(&(q as u16).to_be_bytes()),
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

// ---- PGFL float container ----

fn decode_float(bytes: &[u8]) -> Result<ImageBuffer> {
    if bytes.len() < 16 {
        return Err(Error::malformed("pgfl", "shorter than the 16-byte header"));
    }
    let width = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let height = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let reserved = u32::from_le_bytes(bytes[12..16].try_into().unwrap());
    if reserved != 0 {
        return Err(Error::malformed(
            "pgfl",
            format!("reserved field must be 0, got {reserved}"),
        ));
    }
    let n = width as usize * height as usize;
    let payload = &bytes[16..];
    if payload.len() != n * 8 {
        return Err(Error::malformed(
            "pgfl",
            format!("payload holds {} bytes, need {}", payload.len(), n * 8),
        ));
    }
    let data: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    ImageBuffer::new(width, height, data)
}

/// Loads a `PGFL` float-container image.
pub fn load_float(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if !bytes.starts_with(FLOAT_MAGIC) {
        return Err(Error::malformed("pgfl", "bad magic"));
    }
    decode_float(&bytes)
}

/// Saves losslessly to the `PGFL` float container.
pub fn save_float(img: &ImageBuffer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::with_capacity(16 + img.len() * 8);
    out.extend_from_slice(FLOAT_MAGIC);
    out.extend_from_slice(&img.width().to_le_bytes());
    out.extend_from_slice(&img.height().to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    for &v in img.pixels() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Saves to a container chosen by file extension: `.pgm` (8-bit) or
/// `.pgfl` (lossless floats).
pub fn save_buffer(img: &ImageBuffer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") => save_pgm(img, path, PgmDepth::Eight),
        Some("pgfl") => save_float(img, path),
        _ => Err(Error::UnrecognizedFormat { path: path.into() }),
    }
}

// ---- PNG ----

fn decode_png(bytes: &[u8], bit_depth_hint: Option<u32>, color: ColorMode) -> Result<ImageBuffer> {
    let decoded =
        image::load_from_memory(bytes).map_err(|e| Error::malformed("png", e.to_string()))?;
    use image::DynamicImage::*;
    // (raw interleaved samples as f64, native max, channels per pixel)
    let (samples, native_max, stride, width, height): (Vec<f64>, u32, usize, u32, u32) =
        match &decoded {
            ImageLuma8(img) => (
                img.as_raw().iter().map(|&v| v as f64).collect(),
                255,
                1,
                img.width(),
                img.height(),
            ),
            ImageLuma16(img) => (
                img.as_raw().iter().map(|&v| v as f64).collect(),
                65535,
                1,
                img.width(),
                img.height(),
            ),
            ImageRgb8(img) => (
                img.as_raw().iter().map(|&v| v as f64).collect(),
                255,
                3,
                img.width(),
                img.height(),
            ),
            ImageRgb16(img) => (
                img.as_raw().iter().map(|&v| v as f64).collect(),
                65535,
                3,
                img.width(),
                img.height(),
            ),
            ImageRgba8(img) => (
                img.as_raw().iter().map(|&v| v as f64).collect(),
                255,
                4,
                img.width(),
                img.height(),
            ),
            ImageRgba16(img) => (
                img.as_raw().iter().map(|&v| v as f64).collect(),
                65535,
                4,
                img.width(),
                img.height(),
            ),
            ImageLumaA8(img) => (
                img.as_raw().iter().map(|&v| v as f64).collect(),
                255,
                2,
                img.width(),
                img.height(),
            ),
            ImageLumaA16(img) => (
                img.as_raw().iter().map(|&v| v as f64).collect(),
                65535,
                2,
                img.width(),
                img.height(),
            ),
            _ => return Err(Error::malformed("png", "unsupported pixel layout")),
        };
    let div = divisor(native_max, bit_depth_hint);
    let data: Vec<f64> = match stride {
        1 => samples.iter().map(|v| v / div).collect(),
        // Grayscale with alpha: keep the luma plane, ignore alpha.
        2 => samples.chunks_exact(2).map(|px| px[0] / div).collect(),
        _ => match color {
            ColorMode::Reject => return Err(Error::ColorWithoutConversion),
            ColorMode::Luma => samples
                .chunks_exact(stride)
                .map(|px| (0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2]) / div)
                .collect(),
            ColorMode::Channel(c) => {
                if c > 2 {
                    return Err(Error::InvalidParams {
                        reason: format!("color channel must be 0..=2, got {c}"),
                    });
                }
                samples
                    .chunks_exact(stride)
                    .map(|px| px[c as usize] / div)
                    .collect()
            }
        },
    };
    ImageBuffer::new(width, height, data)
}

// ---- pair persistence ----

/// JSON sidecar written next to a persisted pair.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct PairSidecar {
    /// Photon scale used for synthesis, when known.
    pub a: Option<f64>,
    /// Read-noise standard deviation used for synthesis, when known.
    pub b: Option<f64>,
    /// RNG seed used for synthesis, when known.
    pub seed: Option<u64>,
    pub width: u32,
    pub height: u32,
    /// Clean-half filename, relative to the sidecar.
    pub clean: String,
    /// Noisy-half filename, relative to the sidecar.
    pub noisy: String,
    /// Where the clean image originally came from.
    pub source: Option<String>,
}

const SIDECAR_NAME: &str = "pair.json";
const CLEAN_NAME: &str = "clean.pgfl";
const NOISY_NAME: &str = "noisy.pgfl";

/// Persists a pair into `dir` as two float containers plus a JSON sidecar.
/// Reloading reproduces both halves bit for bit.
pub fn save_pair(pair: &ImagePair, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_float(pair.clean(), dir.join(CLEAN_NAME))?;
    save_float(pair.noisy(), dir.join(NOISY_NAME))?;
    let meta = pair.meta();
    let sidecar = PairSidecar {
        a: meta.params.map(|p| p.a()),
        b: meta.params.map(|p| p.b()),
        seed: meta.seed,
        width: pair.clean().width(),
        height: pair.clean().height(),
        clean: CLEAN_NAME.to_string(),
        noisy: NOISY_NAME.to_string(),
        source: meta.source.clone(),
    };
    let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    let path = dir.join(SIDECAR_NAME);
    fs::write(&path, json + "\n").map_err(|e| Error::io(path, e))
}

/// Loads a pair persisted by [`save_pair`].
pub fn load_pair(dir: impl AsRef<Path>) -> Result<ImagePair> {
    let dir = dir.as_ref();
    let sidecar_path = dir.join(SIDECAR_NAME);
    let json = fs::read_to_string(&sidecar_path).map_err(|e| Error::io(&sidecar_path, e))?;
    let sidecar: PairSidecar =
        serde_json::from_str(&json).map_err(|e| Error::malformed("pair sidecar", e.to_string()))?;
    let clean = load_float(dir.join(&sidecar.clean))?;
    let noisy = load_float(dir.join(&sidecar.noisy))?;
    let params = match (sidecar.a, sidecar.b) {
        (Some(a), Some(b)) => Some(NoiseParams::new(a, b)?),
        _ => None,
    };
    ImagePair::new(
        clean,
        noisy,
        PairMeta {
            source: sidecar.source,
            seed: sidecar.seed,
            params,
        },
    )
}
