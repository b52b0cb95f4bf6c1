//! Perceptual-hash screen identity.
//!
//! The hash is the classic DCT pHash with fixed parameters so that it is
//! reproducible bit-for-bit:
//!
//! 1. luma `0.299 R + 0.587 G + 0.114 B` per pixel;
//! 2. area-averaging (box filter) down to 32x32, rounded to multiples of
//!    1/1024 so that summation order cannot leak into the result;
//! 3. mean subtraction, then an orthonormal 2-D DCT-II;
//! 4. the top-left 8x8 block without the DC term gives 63 coefficients,
//!    each compared (`>`) against their median.
//!
//! Coefficient `k` (row-major over the 8x8 block, DC skipped) sets bit
//! `63 - k`; bit 0 is always zero.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::Screenshot;

const SIDE: usize = 32;
const BLOCK: usize = 8;

/// Default Hamming distance at or below which two screens are the same.
pub const DEFAULT_HAMMING_THRESHOLD: u32 = 4;
/// Default per-channel standard deviation below which a screen is blank.
pub const DEFAULT_BLANK_EPSILON: f64 = 2.0;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HashError {
    #[error("cannot hash a {width}x{height} image")]
    EmptyImage { width: u32, height: u32 },
    #[error("invalid hash literal `{0}`")]
    Parse(String),
}

/// 64-bit perceptual fingerprint of a screenshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScreenHash(pub u64);

impl ScreenHash {
    pub fn distance(self, other: ScreenHash) -> u32 {
        (self.0 ^ other.0).count_ones()
    }
}

impl fmt::Display for ScreenHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl FromStr for ScreenHash {
    type Err = HashError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != 16 {
            return Err(HashError::Parse(s.to_string()));
        }
        u64::from_str_radix(s, 16)
            .map(ScreenHash)
            .map_err(|_| HashError::Parse(s.to_string()))
    }
}

/// Screen-identity rule: distance at or below `threshold` means same screen.
/// Reflexive and symmetric, but not transitive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreenIdentity {
    pub threshold: u32,
}

impl Default for ScreenIdentity {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_HAMMING_THRESHOLD,
        }
    }
}

impl ScreenIdentity {
    pub fn same(&self, a: ScreenHash, b: ScreenHash) -> bool {
        a.distance(b) <= self.threshold
    }
}

/// `true` iff the hashes are within the default Hamming distance of 4.
pub fn same_screen(a: ScreenHash, b: ScreenHash) -> bool {
    ScreenIdentity::default().same(a, b)
}

pub fn phash(shot: &Screenshot) -> ScreenHash {
    phash_image(shot.image()).expect("screenshots are never empty")
}

pub fn phash_image(image: &RgbImage) -> Result<ScreenHash, HashError> {
    let (w, h) = image.dimensions();
    if w == 0 || h == 0 {
        return Err(HashError::EmptyImage { width: w, height: h });
    }
    let mut small = downscale_luma(image);
    small.iter_mut().for_each(|v| *v = (*v * 1024.0).round() / 1024.0);
    let mean = small.iter().sum::<f64>() / (SIDE * SIDE) as f64;
    small.iter_mut().for_each(|v| *v -= mean);

    let coeffs = dct_low_block(&small);
    let mut ac: Vec<f64> = coeffs[1..].to_vec();
    ac.sort_by(f64::total_cmp);
    let median = ac[ac.len() / 2];

    let mut bits = 0u64;
    for (k, c) in coeffs[1..].iter().enumerate() {
        if *c > median {
            bits |= 1 << (63 - k);
        }
    }
    Ok(ScreenHash(bits))
}

/// Per-axis box-filter weights: output cell `i` covers source interval
/// `[i * n / 32, (i + 1) * n / 32)`.
fn box_weights(n: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = n as f64 / SIDE as f64;
    (0..SIDE)
        .map(|i| {
            let lo = i as f64 * scale;
            let hi = (i + 1) as f64 * scale;
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(n);
            (first..last)
                .filter_map(|p| {
                    let overlap = hi.min(p as f64 + 1.0) - lo.max(p as f64);
                    (overlap > 0.0).then_some((p, overlap / scale))
                })
                .collect()
        })
        .collect()
}

fn downscale_luma(image: &RgbImage) -> Vec<f64> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    let raw = image.as_raw();
    let wx = box_weights(w);
    let wy = box_weights(h);

    // Horizontal pass: h rows x 32 columns.
    let mut rows = vec![0.0f64; h * SIDE];
    for y in 0..h {
        let line = &raw[y * w * 3..(y + 1) * w * 3];
        for (j, weights) in wx.iter().enumerate() {
            let mut acc = 0.0;
            for &(x, wgt) in weights {
                let p = &line[x * 3..x * 3 + 3];
                acc += wgt * (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64);
            }
            rows[y * SIDE + j] = acc;
        }
    }

    let mut out = vec![0.0f64; SIDE * SIDE];
    for (i, weights) in wy.iter().enumerate() {
        for j in 0..SIDE {
            out[i * SIDE + j] = weights.iter().map(|&(y, wgt)| wgt * rows[y * SIDE + j]).sum();
        }
    }
    out
}

fn cos_table() -> &'static [[f64; SIDE]; BLOCK] {
    static TABLE: OnceLock<[[f64; SIDE]; BLOCK]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [[0.0; SIDE]; BLOCK];
        for (u, row) in t.iter_mut().enumerate() {
            let norm = if u == 0 {
                (1.0 / SIDE as f64).sqrt()
            } else {
                (2.0 / SIDE as f64).sqrt()
            };
            for (x, v) in row.iter_mut().enumerate() {
                *v = norm * (PI * (2 * x + 1) as f64 * u as f64 / (2 * SIDE) as f64).cos();
            }
        }
        t
    })
}

/// Low-frequency 8x8 block of the orthonormal DCT-II, row-major.
fn dct_low_block(pixels: &[f64]) -> [f64; BLOCK * BLOCK] {
    let c = cos_table();
    // Transform columns first: tmp[u][x] = sum_y c[u][y] * p[y][x].
    let mut tmp = [[0.0f64; SIDE]; BLOCK];
    for u in 0..BLOCK {
        for x in 0..SIDE {
            tmp[u][x] = (0..SIDE).map(|y| c[u][y] * pixels[y * SIDE + x]).sum();
        }
    }
    let mut out = [0.0f64; BLOCK * BLOCK];
    for u in 0..BLOCK {
        for v in 0..BLOCK {
            out[u * BLOCK + v] = (0..SIDE).map(|x| c[v][x] * tmp[u][x]).sum();
        }
    }
    out
}

/// Per-channel population standard deviation of the pixels.
pub fn channel_std(image: &RgbImage) -> [f64; 3] {
    let n = (image.width() as u64 * image.height() as u64) as f64;
    let mut sum = [0u64; 3];
    let mut sum_sq = [0u64; 3];
    for p in image.as_raw().chunks_exact(3) {
        for c in 0..3 {
            let v = p[c] as u64;
            sum[c] += v;
            sum_sq[c] += v * v;
        }
    }
    let mut out = [0.0; 3];
    for c in 0..3 {
        let mean = sum[c] as f64 / n;
        out[c] = (sum_sq[c] as f64 / n - mean * mean).max(0.0).sqrt();
    }
    out
}

/// A screen is blank when every channel's standard deviation is below
/// `epsilon` (0-255 scale).
pub fn is_blank_with(shot: &Screenshot, epsilon: f64) -> bool {
    channel_std(shot.image()).iter().all(|s| *s < epsilon)
}

pub fn is_blank(shot: &Screenshot) -> bool {
    is_blank_with(shot, DEFAULT_BLANK_EPSILON)
}
