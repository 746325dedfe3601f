//! Differentiable surrogate of the JPEG round-trip. Hard rounding is replaced
//! by a cubic soft round whose derivative is nonzero almost everywhere, so an
//! attacker can backpropagate through compression. The final [0,1] clamp is
//! excluded from the differentiated path; the projection step of the attack
//! loop enforces validity instead.

use crate::error::{Error, Result};
use crate::image::{scatter_add_blocks, stitch_plane, to_blocks, to_blocks_raw, Image, Plane};
use crate::jpeg::{dct2d, idct2d, quality_to_table, QuantTable};

/// round(x) + (x - round(x))^3 with round = half away from zero. Agrees with
/// hard rounding to within 0.125 and is smooth inside each unit cell.
pub fn soft_round(x: f64) -> f64 {
    let r = x.round();
    r + (x - r).powi(3)
}

/// d/dx soft_round = 3 (x - round(x))^2. Zero exactly at integers.
pub fn soft_round_derivative(x: f64) -> f64 {
    let f = x - x.round();
    3.0 * f * f
}

/// Runs the surrogate pipeline per block, returning the pre-clamp output tile
/// and the quantized-domain values needed by the backward pass.
fn forward_block(tile: &[f64; 64], table: &QuantTable) -> ([f64; 64], [f64; 64]) {
    let mut shifted = [0.0; 64];
    for (s, &v) in shifted.iter_mut().zip(tile.iter()) {
        *s = v * 255.0 - 128.0;
    }
    let coeffs = dct2d(&shifted);
    let mut z = [0.0; 64];
    let mut dequant = [0.0; 64];
    for i in 0..64 {
        let q = table.entries[i] as f64;
        z[i] = coeffs[i] / q;
        dequant[i] = soft_round(z[i]) * q;
    }
    let restored = idct2d(&dequant);
    let mut out = [0.0; 64];
    for (o, &r) in out.iter_mut().zip(&restored) {
        *o = (r + 128.0) / 255.0;
    }
    (out, z)
}

/// Surrogate forward pass without the final clamp. This is the function the
/// attack differentiates; its vjp is exact.
pub fn diff_jpeg_forward_raw(img: &Image, quality: u8) -> Result<Plane> {
    let table = quality_to_table(quality)?;
    let mut grid = to_blocks(img);
    for by in 0..grid.blocks_y() {
        for bx in 0..grid.blocks_x() {
            let (out, _) = forward_block(grid.block(by, bx), &table);
            *grid.block_mut(by, bx) = out;
        }
    }
    Ok(stitch_plane(&grid))
}

/// Surrogate forward pass materialized as a valid image (clamped to [0,1]).
pub fn diff_jpeg_forward(img: &Image, quality: u8) -> Result<Image> {
    Ok(diff_jpeg_forward_raw(img, quality)?.clamped_image())
}

/// Exact reverse-mode gradient of `diff_jpeg_forward_raw`: given a cotangent
/// on the output, returns the cotangent on the input pixels. Linear in the
/// cotangent.
pub fn diff_jpeg_vjp(img: &Image, quality: u8, cotangent: &Plane) -> Result<Plane> {
    if !cotangent.same_dims_as_image(img) {
        return Err(Error::shape(format!(
            "cotangent {}x{} does not match image {}x{}",
            cotangent.height,
            cotangent.width,
            img.height(),
            img.width()
        )));
    }
    let table = quality_to_table(quality)?;
    let in_grid = to_blocks(img);
    let mut cot_grid = to_blocks_raw(cotangent.height, cotangent.width, &cotangent.data);
    for by in 0..in_grid.blocks_y() {
        for bx in 0..in_grid.blocks_x() {
            let (_, z) = forward_block(in_grid.block(by, bx), &table);
            let g_out = cot_grid.block(by, bx);
            // Padded cells are replicated reads, not writes; zero their
            // cotangent so only real output pixels contribute.
            let mut g_restored = [0.0; 64];
            for y in 0..8 {
                let real_y = by * 8 + y < in_grid.height();
                for x in 0..8 {
                    let real = real_y && bx * 8 + x < in_grid.width();
                    g_restored[y * 8 + x] = if real { g_out[y * 8 + x] / 255.0 } else { 0.0 };
                }
            }
            let g_dequant = dct2d(&g_restored);
            // Chain through dequantize (x q) and quantize (/ q): the scales
            // cancel, leaving only the soft-round Jacobian.
            let mut g_coeffs = [0.0; 64];
            for i in 0..64 {
                g_coeffs[i] = g_dequant[i] * soft_round_derivative(z[i]);
            }
            let g_shifted = idct2d(&g_coeffs);
            let g_tile = cot_grid.block_mut(by, bx);
            for (g, &s) in g_tile.iter_mut().zip(&g_shifted) {
                *g = s * 255.0;
            }
        }
    }
    let mut grad = Plane::zeros(img.height(), img.width());
    scatter_add_blocks(&cot_grid, &mut grad.data);
    Ok(grad)
}

/// The surrogate as a value: a fixed-quality transform with a forward map and
/// its vector-Jacobian product.
#[derive(Clone, Copy, Debug)]
pub struct DifferentiableJpeg {
    pub quality: u8,
}

impl DifferentiableJpeg {
    pub fn new(quality: u8) -> Result<Self> {
        quality_to_table(quality)?;
        Ok(DifferentiableJpeg { quality })
    }

    pub fn forward(&self, img: &Image) -> Result<Image> {
        diff_jpeg_forward(img, self.quality)
    }

    pub fn forward_raw(&self, img: &Image) -> Result<Plane> {
        diff_jpeg_forward_raw(img, self.quality)
    }

    pub fn vjp(&self, img: &Image, cotangent: &Plane) -> Result<Plane> {
        diff_jpeg_vjp(img, self.quality, cotangent)
    }
}
