//! Image primitives: validated `[0,1]` rasters, unconstrained planes for
//! gradients, 8x8 block tiling with edge-replication padding, perturbation
//! norms, and the l-infinity ball projection.

use crate::error::{Error, Result};

/// Side length of the tiling used by the codec and SLQ.
pub const BLOCK_SIZE: usize = 8;

/// A single-channel image. Row-major, every pixel in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn from_vec(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid(format!("image dimensions {height}x{width} must be positive")));
        }
        if data.len() != height * width {
            return Err(Error::shape(format!(
                "image data length {} does not match {height}x{width}",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(Image { height, width, data })
    }

    /// Constructor for values already known to be in range (post-clamp paths).
    pub(crate) fn from_vec_unchecked(height: usize, width: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width);
        debug_assert!(data.iter().all(|v| (0.0..=1.0).contains(v)));
        Image { height, width, data }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x));
            }
        }
        Image::from_vec(height, width, data)
    }

    pub fn constant(height: usize, width: usize, value: f64) -> Result<Self> {
        Image::from_vec(height, width, vec![value; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixel_count(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn same_dims(&self, other: &Image) -> bool {
        self.height == other.height && self.width == other.width
    }
}

/// An unconstrained raster of the same layout as `Image`. Carries gradients,
/// cotangents, and pre-clamp transform outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn zeros(height: usize, width: usize) -> Self {
        Plane { height, width, data: vec![0.0; height * width] }
    }

    pub fn from_image(img: &Image) -> Self {
        Plane { height: img.height, width: img.width, data: img.data.clone() }
    }

    /// Materializes the plane as a valid image by clamping to `[0, 1]`.
    pub fn clamped_image(&self) -> Image {
        let data = self.data.iter().map(|v| v.clamp(0.0, 1.0)).collect();
        Image::from_vec_unchecked(self.height, self.width, data)
    }

    pub fn same_dims_as_image(&self, img: &Image) -> bool {
        self.height == img.height && self.width == img.width
    }
}

/// An image cut into 8x8 tiles. Sizes that are not multiples of 8 are padded
/// by replicating the last row/column; pad amounts are recorded so stitching
/// can strip them again.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockGrid {
    height: usize,
    width: usize,
    blocks_y: usize,
    blocks_x: usize,
    pad_bottom: usize,
    pad_right: usize,
    blocks: Vec<[f64; 64]>,
}

impl BlockGrid {
    pub fn blocks_y(&self) -> usize {
        self.blocks_y
    }

    pub fn blocks_x(&self) -> usize {
        self.blocks_x
    }

    pub fn pad_bottom(&self) -> usize {
        self.pad_bottom
    }

    pub fn pad_right(&self) -> usize {
        self.pad_right
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn block(&self, by: usize, bx: usize) -> &[f64; 64] {
        &self.blocks[by * self.blocks_x + bx]
    }

    pub(crate) fn block_mut(&mut self, by: usize, bx: usize) -> &mut [f64; 64] {
        &mut self.blocks[by * self.blocks_x + bx]
    }
}

pub(crate) fn to_blocks_raw(height: usize, width: usize, data: &[f64]) -> BlockGrid {
    debug_assert_eq!(data.len(), height * width);
    let blocks_y = height.div_ceil(BLOCK_SIZE);
    let blocks_x = width.div_ceil(BLOCK_SIZE);
    let mut blocks = vec![[0.0; 64]; blocks_y * blocks_x];
    for by in 0..blocks_y {
        for bx in 0..blocks_x {
            let tile = &mut blocks[by * blocks_x + bx];
            for y in 0..BLOCK_SIZE {
                let src_y = (by * BLOCK_SIZE + y).min(height - 1);
                for x in 0..BLOCK_SIZE {
                    let src_x = (bx * BLOCK_SIZE + x).min(width - 1);
                    tile[y * BLOCK_SIZE + x] = data[src_y * width + src_x];
                }
            }
        }
    }
    BlockGrid {
        height,
        width,
        blocks_y,
        blocks_x,
        pad_bottom: blocks_y * BLOCK_SIZE - height,
        pad_right: blocks_x * BLOCK_SIZE - width,
        blocks,
    }
}

/// Cuts an image into 8x8 tiles, replicating the last row/column into any
/// padding.
pub fn to_blocks(img: &Image) -> BlockGrid {
    to_blocks_raw(img.height, img.width, &img.data)
}

pub(crate) fn stitch_plane(grid: &BlockGrid) -> Plane {
    let mut data = vec![0.0; grid.height * grid.width];
    for by in 0..grid.blocks_y {
        for bx in 0..grid.blocks_x {
            let tile = grid.block(by, bx);
            for y in 0..BLOCK_SIZE {
                let dst_y = by * BLOCK_SIZE + y;
                if dst_y >= grid.height {
                    break;
                }
                for x in 0..BLOCK_SIZE {
                    let dst_x = bx * BLOCK_SIZE + x;
                    if dst_x >= grid.width {
                        break;
                    }
                    data[dst_y * grid.width + dst_x] = tile[y * BLOCK_SIZE + x];
                }
            }
        }
    }
    Plane { height: grid.height, width: grid.width, data }
}

/// Stitches tiles back into an image, dropping padding. Values are clamped to
/// `[0, 1]`; for grids produced by `to_blocks` this is a no-op and the
/// round-trip is exact.
pub fn from_blocks(grid: &BlockGrid) -> Image {
    stitch_plane(grid).clamped_image()
}

/// Adjoint of `to_blocks_raw`: adds each grid cell's value onto the source
/// pixel it was read from, so replicated padding contributes to edge pixels.
pub(crate) fn scatter_add_blocks(grid: &BlockGrid, out: &mut [f64]) {
    debug_assert_eq!(out.len(), grid.height * grid.width);
    for by in 0..grid.blocks_y {
        for bx in 0..grid.blocks_x {
            let tile = grid.block(by, bx);
            for y in 0..BLOCK_SIZE {
                let src_y = (by * BLOCK_SIZE + y).min(grid.height - 1);
                for x in 0..BLOCK_SIZE {
                    let src_x = (bx * BLOCK_SIZE + x).min(grid.width - 1);
                    out[src_y * grid.width + src_x] += tile[y * BLOCK_SIZE + x];
                }
            }
        }
    }
}

fn check_same_dims(a: &Image, b: &Image) -> Result<()> {
    if !a.same_dims(b) {
        return Err(Error::shape(format!(
            "images {}x{} and {}x{} differ in size",
            a.height, a.width, b.height, b.width
        )));
    }
    Ok(())
}

/// Largest absolute per-pixel difference.
pub fn linf_distance(a: &Image, b: &Image) -> Result<f64> {
    check_same_dims(a, b)?;
    Ok(a.data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

/// Euclidean distance over all pixels.
pub fn l2_distance(a: &Image, b: &Image) -> Result<f64> {
    check_same_dims(a, b)?;
    Ok(a.data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// Perturbation strength of an adversarial image relative to its original.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PerturbationStats {
    pub linf: f64,
    pub l2: f64,
}

impl PerturbationStats {
    pub fn between(adv: &Image, orig: &Image) -> Result<Self> {
        Ok(PerturbationStats {
            linf: linf_distance(adv, orig)?,
            l2: l2_distance(adv, orig)?,
        })
    }
}

/// Projects `x_adv` onto the eps-ball around `x_orig` (per-pixel clamp), then
/// onto the valid pixel range.
pub fn project_linf(x_adv: &Image, x_orig: &Image, eps: f64) -> Result<Image> {
    check_same_dims(x_adv, x_orig)?;
    if !(eps >= 0.0) {
        return Err(Error::invalid(format!("eps {eps} must be nonnegative")));
    }
    let data = x_adv
        .data
        .iter()
        .zip(&x_orig.data)
        .map(|(&a, &o)| a.clamp(o - eps, o + eps).clamp(0.0, 1.0))
        .collect();
    Ok(Image::from_vec_unchecked(x_adv.height, x_adv.width, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_image(height: usize, width: usize, seed: u64) -> Image {
        let mut rng = seeds::rng(seed, &[height as u64, width as u64]);
        Image::from_fn(height, width, |_, _| rng.random::<f64>()).unwrap()
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(Image::from_vec(0, 4, vec![]).is_err());
        assert!(Image::from_vec(2, 2, vec![0.0; 3]).is_err());
        assert!(Image::from_vec(1, 2, vec![0.5, 1.5]).is_err());
        assert!(Image::from_vec(1, 2, vec![0.5, -0.1]).is_err());
        assert!(Image::from_vec(1, 2, vec![0.5, f64::NAN]).is_err());
        assert!(Image::from_vec(1, 2, vec![0.5, 1.0]).is_ok());
    }

    #[test]
    fn exact_tiling_has_no_padding() {
        let img = random_image(8, 8, 1);
        let grid = to_blocks(&img);
        assert_eq!((grid.blocks_y(), grid.blocks_x()), (1, 1));
        assert_eq!((grid.pad_bottom(), grid.pad_right()), (0, 0));
    }

    #[test]
    fn tall_image_pads_bottom() {
        let img = random_image(9, 8, 2);
        let grid = to_blocks(&img);
        assert_eq!((grid.blocks_y(), grid.blocks_x()), (2, 1));
        assert_eq!(grid.pad_bottom(), 7);
        assert_eq!(grid.pad_right(), 0);
        // Padded rows replicate the last image row.
        let tile = grid.block(1, 0);
        for y in 1..BLOCK_SIZE {
            for x in 0..BLOCK_SIZE {
                assert_eq!(tile[y * BLOCK_SIZE + x], img.get(8, x));
            }
        }
    }

    #[test]
    fn constant_image_gives_constant_blocks() {
        let img = Image::constant(16, 24, 0.5).unwrap();
        let grid = to_blocks(&img);
        assert_eq!((grid.blocks_y(), grid.blocks_x()), (2, 3));
        for by in 0..2 {
            for bx in 0..3 {
                assert!(grid.block(by, bx).iter().all(|&v| v == 0.5));
            }
        }
    }

    #[test]
    fn block_round_trip_is_identity() {
        let img = random_image(13, 17, 3);
        assert_eq!(from_blocks(&to_blocks(&img)), img);
    }

    #[test]
    fn zero_grid_stitches_to_zero_image() {
        let img = Image::constant(8, 8, 0.0).unwrap();
        let restored = from_blocks(&to_blocks(&img));
        assert!(restored.data().iter().all(|&v| v == 0.0));
        assert_eq!((restored.height(), restored.width()), (8, 8));
    }

    #[test]
    fn padding_is_stripped_on_stitch() {
        let img = random_image(10, 10, 4);
        let restored = from_blocks(&to_blocks(&img));
        assert_eq!((restored.height(), restored.width()), (10, 10));
        assert_eq!(restored, img);
    }

    #[test]
    fn scatter_add_is_adjoint_of_tiling() {
        // <to_blocks(u), g> over grid cells must equal <u, scatter_add(g)>
        // over pixels; checked on a padded size so replication matters.
        let u = random_image(11, 13, 5);
        let mut rng = seeds::rng(6, &[]);
        let grid_u = to_blocks(&u);
        let mut g = grid_u.clone();
        let mut lhs = 0.0;
        for by in 0..g.blocks_y() {
            for bx in 0..g.blocks_x() {
                for i in 0..64 {
                    let r: f64 = rng.random::<f64>() - 0.5;
                    lhs += grid_u.block(by, bx)[i] * r;
                    g.block_mut(by, bx)[i] = r;
                }
            }
        }
        let mut acc = vec![0.0; 11 * 13];
        scatter_add_blocks(&g, &mut acc);
        let rhs: f64 = acc.iter().zip(u.data()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-9, "lhs {lhs} rhs {rhs}");
    }

    #[test]
    fn linf_of_identical_images_is_zero() {
        let img = random_image(7, 9, 7);
        assert_eq!(linf_distance(&img, &img).unwrap(), 0.0);
        assert_eq!(l2_distance(&img, &img).unwrap(), 0.0);
    }

    #[test]
    fn linf_of_constant_offset() {
        let a = Image::constant(6, 6, 0.3).unwrap();
        let b = Image::constant(6, 6, 0.3 + 16.0 / 255.0).unwrap();
        let d = linf_distance(&a, &b).unwrap();
        assert!((d - 16.0 / 255.0).abs() < 1e-15);
    }

    #[test]
    fn norms_match_elementwise_oracles() {
        let a = random_image(19, 23, 8);
        let b = random_image(19, 23, 9);
        let mut max_abs = 0.0f64;
        let mut sum_sq = 0.0f64;
        for (x, y) in a.data().iter().zip(b.data()) {
            max_abs = max_abs.max((x - y).abs());
            sum_sq += (x - y) * (x - y);
        }
        assert_eq!(linf_distance(&a, &b).unwrap(), max_abs);
        assert!((l2_distance(&a, &b).unwrap() - sum_sq.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn l2_single_pixel_difference() {
        let a = Image::constant(5, 5, 0.2).unwrap();
        let mut data = a.data().to_vec();
        data[12] = 0.5;
        let b = Image::from_vec(5, 5, data).unwrap();
        assert!((l2_distance(&a, &b).unwrap() - 0.3).abs() < 1e-12);
        assert!((linf_distance(&a, &b).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn norms_reject_dimension_mismatch() {
        let a = random_image(4, 4, 10);
        let b = random_image(4, 5, 10);
        assert!(linf_distance(&a, &b).is_err());
        assert!(l2_distance(&a, &b).is_err());
        assert!(project_linf(&a, &b, 0.1).is_err());
    }

    #[test]
    fn perturbation_stats_inequality_chain() {
        let a = random_image(12, 12, 11);
        let b = random_image(12, 12, 12);
        let s = PerturbationStats::between(&a, &b).unwrap();
        let n = (a.pixel_count() as f64).sqrt();
        assert!(s.linf > 0.0);
        assert!(s.linf <= s.l2 + 1e-12);
        assert!(s.l2 <= s.linf * n + 1e-12);
    }

    #[test]
    fn projection_with_zero_eps_returns_original() {
        let orig = random_image(9, 9, 13);
        let adv = random_image(9, 9, 14);
        let out = project_linf(&adv, &orig, 0.0).unwrap();
        assert_eq!(out, orig);
    }

    #[test]
    fn projection_leaves_feasible_points_unchanged() {
        let orig = Image::constant(6, 6, 0.5).unwrap();
        let mut rng = seeds::rng(15, &[]);
        let adv = Image::from_fn(6, 6, |_, _| 0.5 + (rng.random::<f64>() - 0.5) * 0.05).unwrap();
        let out = project_linf(&adv, &orig, 16.0 / 255.0).unwrap();
        assert_eq!(out, adv);
    }

    #[test]
    fn projection_clamps_to_ball_boundary() {
        let orig = Image::constant(4, 4, 0.9).unwrap();
        let adv = Image::constant(4, 4, 1.0).unwrap();
        // 1.2 is not a valid pixel, so emulate "far outside" with eps small
        // enough that even 1.0 is outside the ball.
        let eps = 16.0 / 255.0;
        let out = project_linf(&adv, &orig, 0.02).unwrap();
        assert!(out.data().iter().all(|&v| (v - 0.92).abs() < 1e-12));
        let out2 = project_linf(&adv, &orig, eps).unwrap();
        // 0.9 + 16/255 < 1.0, so every pixel lands on the ball boundary.
        assert!(out2.data().iter().all(|&v| (v - (0.9 + eps)).abs() < 1e-12));
        assert!(linf_distance(&out2, &orig).unwrap() <= eps + 1e-12);
    }

    #[test]
    fn projection_rejects_negative_eps() {
        let img = random_image(3, 3, 16);
        assert!(project_linf(&img, &img, -0.1).is_err());
        assert!(project_linf(&img, &img, f64::NAN).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn block_round_trip_identity_all_sizes(h in 1usize..=64, w in 1usize..=64, seed in 0u64..1000) {
            let img = random_image(h, w, seed);
            let grid = to_blocks(&img);
            prop_assert_eq!(grid.blocks_y(), h.div_ceil(8));
            prop_assert_eq!(grid.blocks_x(), w.div_ceil(8));
            prop_assert_eq!(from_blocks(&grid), img);
        }

        #[test]
        fn projection_is_idempotent_and_feasible(seed in 0u64..1000, eps in 0.0f64..0.5) {
            let orig = random_image(8, 8, seed);
            let adv = random_image(8, 8, seed.wrapping_add(7919));
            let once = project_linf(&adv, &orig, eps).unwrap();
            let twice = project_linf(&once, &orig, eps).unwrap();
            prop_assert_eq!(&once, &twice);
            prop_assert!(linf_distance(&once, &orig).unwrap() <= eps + 1e-12);
            prop_assert!(once.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        }

        #[test]
        fn distances_are_symmetric(sa in 0u64..500, sb in 0u64..500) {
            let a = random_image(10, 10, sa);
            let b = random_image(10, 10, sb.wrapping_add(100_000));
            prop_assert_eq!(linf_distance(&a, &b).unwrap(), linf_distance(&b, &a).unwrap());
            prop_assert_eq!(l2_distance(&a, &b).unwrap(), l2_distance(&b, &a).unwrap());
        }
    }
}
