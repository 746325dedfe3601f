//! Lossy JPEG round-trip: blockwise DCT, quality-scaled quantization,
//! dequantization, inverse DCT. No entropy coding; quantize/dequantize is the
//! only information-destroying step and the only one the defense relies on.

use std::sync::LazyLock;

use crate::error::{Error, Result};
use crate::image::{from_blocks, to_blocks, Image, BLOCK_SIZE};

/// Standard luminance quantization table (JPEG spec example tables), zigzag
/// unrolled to row-major.
#[rustfmt::skip]
pub const LUMA_BASE_TABLE: [u16; 64] = [
    16, 11, 10, 16,  24,  40,  51,  61,
    12, 12, 14, 19,  26,  58,  60,  55,
    14, 13, 16, 24,  40,  57,  69,  56,
    14, 17, 22, 29,  51,  87,  80,  62,
    18, 22, 37, 56,  68, 109, 103,  77,
    24, 35, 55, 64,  81, 104, 113,  92,
    49, 64, 78, 87, 103, 121, 120, 101,
    72, 92, 95, 98, 112, 100, 103,  99,
];

/// Frequency-domain divisors for one quality level.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuantTable {
    pub entries: [u16; 64],
    pub quality: u8,
}

/// Scales the base luminance table to a quality level using the reference
/// codec convention: scale = 5000/q below 50, 200-2q at or above.
pub fn quality_to_table(quality: u8) -> Result<QuantTable> {
    if !(1..=100).contains(&quality) {
        return Err(Error::invalid(format!("jpeg quality {quality} outside [1, 100]")));
    }
    let q = quality as u32;
    let scale = if q < 50 { 5000 / q } else { 200 - 2 * q };
    let mut entries = [0u16; 64];
    for (e, &base) in entries.iter_mut().zip(&LUMA_BASE_TABLE) {
        *e = ((base as u32 * scale + 50) / 100).clamp(1, 255) as u16;
    }
    Ok(QuantTable { entries, quality })
}

/// Orthonormal DCT-II basis: row k holds s(k)*cos(pi*(2n+1)*k/16) with
/// s(0)=1/sqrt(8) and s(k)=1/2 otherwise, so the transform matrix is
/// orthogonal and the DC coefficient of a constant block c is 8c.
static COS_BASIS: LazyLock<[[f64; 8]; 8]> = LazyLock::new(|| {
    let mut c = [[0.0; 8]; 8];
    for (k, row) in c.iter_mut().enumerate() {
        let s = if k == 0 { 0.125f64.sqrt() } else { 0.5 };
        for (n, v) in row.iter_mut().enumerate() {
            let angle = std::f64::consts::PI * (2 * n + 1) as f64 * k as f64 / 16.0;
            *v = s * angle.cos();
        }
    }
    c
});

/// 2D DCT-II of an 8x8 tile (row-major), computed as C * B * C^T.
pub fn dct2d(block: &[f64; 64]) -> [f64; 64] {
    let c = &*COS_BASIS;
    let mut tmp = [0.0; 64];
    for k in 0..8 {
        for x in 0..8 {
            let mut acc = 0.0;
            for y in 0..8 {
                acc += c[k][y] * block[y * 8 + x];
            }
            tmp[k * 8 + x] = acc;
        }
    }
    let mut out = [0.0; 64];
    for k in 0..8 {
        for l in 0..8 {
            let mut acc = 0.0;
            for x in 0..8 {
                acc += tmp[k * 8 + x] * c[l][x];
            }
            out[k * 8 + l] = acc;
        }
    }
    out
}

/// Inverse of `dct2d`: C^T * X * C.
pub fn idct2d(coeffs: &[f64; 64]) -> [f64; 64] {
    let c = &*COS_BASIS;
    let mut tmp = [0.0; 64];
    for y in 0..8 {
        for v in 0..8 {
            let mut acc = 0.0;
            for u in 0..8 {
                acc += c[u][y] * coeffs[u * 8 + v];
            }
            tmp[y * 8 + v] = acc;
        }
    }
    let mut out = [0.0; 64];
    for y in 0..8 {
        for x in 0..8 {
            let mut acc = 0.0;
            for v in 0..8 {
                acc += tmp[y * 8 + v] * c[v][x];
            }
            out[y * 8 + x] = acc;
        }
    }
    out
}

/// Compresses and immediately decompresses an image at the given quality.
/// Per 8x8 block: level shift to [-128, 127], DCT, divide by the quant table
/// and round half away from zero, multiply back, inverse DCT, unshift, clamp.
pub fn jpeg_round_trip(img: &Image, quality: u8) -> Result<Image> {
    let table = quality_to_table(quality)?;
    let mut grid = to_blocks(img);
    let mut shifted = [0.0; 64];
    for by in 0..grid.blocks_y() {
        for bx in 0..grid.blocks_x() {
            let tile = grid.block_mut(by, bx);
            for (s, &v) in shifted.iter_mut().zip(tile.iter()) {
                *s = v * 255.0 - 128.0;
            }
            let mut coeffs = dct2d(&shifted);
            for (c, &q) in coeffs.iter_mut().zip(&table.entries) {
                let q = q as f64;
                *c = (*c / q).round() * q;
            }
            let restored = idct2d(&coeffs);
            for (t, &r) in tile.iter_mut().zip(&restored) {
                *t = ((r + 128.0) / 255.0).clamp(0.0, 1.0);
            }
        }
    }
    debug_assert_eq!(BLOCK_SIZE, 8);
    Ok(from_blocks(&grid))
}
