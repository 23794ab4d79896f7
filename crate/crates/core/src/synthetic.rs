//! Deterministic synthetic clean images.
//!
//! Evaluation sweeps need noise-free inputs with the flavor of natural
//! photographs: smooth gradients, soft blobs, low-amplitude texture, a few
//! flat regions with hard edges, and an 8-bit level grid (as if the image
//! had been loaded from an ordinary PGM or PNG). [`synthetic_image`]
//! composes those ingredients from seeded pseudo-random parameters, so a
//! `(width, height, seed)` triple always reproduces the same pixels on any
//! platform.

use std::f64::consts::TAU;

use crate::buffer::ImageBuffer;
use crate::error::Result;
use crate::rng::StreamRng;

/// Substream tag separating image-content draws from noise-synthesis draws
/// made with the same user-facing seed.
const SYNTH_STREAM: u64 = 0x53_59_4E_54_48_45_54_49;

/// Output values are normalized into this band before quantization,
/// keeping synthetic scenes away from hard clipping at 0 and 1.
const LO: f64 = 0.02;
const HI: f64 = 0.98;

struct Blob {
    cx: f64,
    cy: f64,
    inv_two_sigma_sq: f64,
    amp: f64,
}

struct Wave {
    fx: f64,
    fy: f64,
    phase: f64,
    amp: f64,
}

struct Patch {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
    amp: f64,
}

/// Generates a deterministic noise-free test image on the 8-bit level grid
/// (every pixel is `k / 255` for an integer `k`), with values confined to
/// `[0.02, 0.98]`.
pub fn synthetic_image(width: u32, height: u32, seed: u64) -> Result<ImageBuffer> {
    let mut rng = StreamRng::substream(seed, SYNTH_STREAM);

    // Linear gradient across a random direction.
    let angle = rng.next_f64() * TAU;
    let grad_strength = 0.4 + 0.6 * rng.next_f64();
    let (gx, gy) = (angle.cos() * grad_strength, angle.sin() * grad_strength);

    let n_blobs = 4 + (rng.next_u64() % 4) as usize;
    let blobs: Vec<Blob> = (0..n_blobs)
        .map(|_| {
            let sigma = 0.05 + 0.20 * rng.next_f64();
            let sign = if rng.next_f64() < 0.5 { -1.0 } else { 1.0 };
            Blob {
                cx: rng.next_f64(),
                cy: rng.next_f64(),
                inv_two_sigma_sq: 1.0 / (2.0 * sigma * sigma),
                amp: sign * (0.15 + 0.35 * rng.next_f64()),
            }
        })
        .collect();

    let n_waves = 2 + (rng.next_u64() % 2) as usize;
    let waves: Vec<Wave> = (0..n_waves)
        .map(|_| Wave {
            fx: 2.0 + 10.0 * rng.next_f64(),
            fy: 2.0 + 10.0 * rng.next_f64(),
            phase: rng.next_f64() * TAU,
            amp: 0.03 + 0.07 * rng.next_f64(),
        })
        .collect();

    let n_patches = 2 + (rng.next_u64() % 2) as usize;
    let patches: Vec<Patch> = (0..n_patches)
        .map(|_| {
            let x0 = rng.next_f64() * 0.8;
            let y0 = rng.next_f64() * 0.8;
            let sign = if rng.next_f64() < 0.5 { -1.0 } else { 1.0 };
            Patch {
                x0,
                y0,
                x1: x0 + 0.08 + 0.25 * rng.next_f64(),
                y1: y0 + 0.08 + 0.25 * rng.next_f64(),
                amp: sign * (0.10 + 0.20 * rng.next_f64()),
            }
        })
        .collect();

    let w_scale = 1.0 / (width.max(2) - 1) as f64;
    let h_scale = 1.0 / (height.max(2) - 1) as f64;
    let raw = ImageBuffer::from_fn(width, height, |x, y| {
        let u = x as f64 * w_scale;
        let v = y as f64 * h_scale;
        let mut val = gx * u + gy * v;
        for b in &blobs {
            let du = u - b.cx;
            let dv = v - b.cy;
            val += b.amp * (-(du * du + dv * dv) * b.inv_two_sigma_sq).exp();
        }
        for wav in &waves {
            val += wav.amp * (TAU * (wav.fx * u + wav.fy * v) + wav.phase).cos();
        }
        for p in &patches {
            if u >= p.x0 && u < p.x1 && v >= p.y0 && v < p.y1 {
                val += p.amp;
            }
        }
        val
    })?;

    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in raw.pixels() {
        min = min.min(v);
        max = max.max(v);
    }
    let span = max - min;
    let data: Vec<f64> = if span < 1e-9 {
        vec![(0.5f64 * 255.0).round() / 255.0; raw.len()]
    } else {
        let scale = (HI - LO) / span;
        raw.pixels()
            .iter()
            .map(|&v| ((LO + (v - min) * scale) * 255.0).round() / 255.0)
            .collect()
    };
    ImageBuffer::new(width, height, data)
}

/// The three standard evaluation scenes (481 x 321, seeds 1000..1002).
pub fn default_suite() -> Vec<ImageBuffer> {
    (0..3)
        .map(|i| synthetic_image(481, 321, 1000 + i).expect("nonzero dimensions"))
        .collect()
}
