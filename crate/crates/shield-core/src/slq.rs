//! Stochastic Local Quantization: compress the input at every quality in the
//! configured set, then stitch a mosaic that takes each 8x8 block verbatim
//! from one candidate, chosen by a per-block seeded draw. No central crop;
//! the mosaic covers the full image.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::image::{from_blocks, to_blocks, Image};
use crate::jpeg::jpeg_round_trip;
use crate::seeds;
use rand::Rng;

pub const DEFAULT_QUALITIES: [u8; 4] = [20, 40, 60, 80];

/// Configuration for one SLQ transform. Qualities are strictly increasing;
/// the block size is pinned to the codec's 8x8 tiling so block provenance is
/// exact.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlqConfig {
    qualities: Vec<u8>,
    block_size: usize,
    seed: u64,
}

impl SlqConfig {
    pub fn new(qualities: Vec<u8>, seed: u64) -> Result<Self> {
        if qualities.is_empty() {
            return Err(Error::invalid("slq quality list is empty"));
        }
        for pair in qualities.windows(2) {
            if pair[0] >= pair[1] {
                return Err(Error::invalid(format!(
                    "slq qualities must be strictly increasing, got {qualities:?}"
                )));
            }
        }
        if let Some(&q) = qualities.iter().find(|q| !(1..=100).contains(*q)) {
            return Err(Error::invalid(format!("slq quality {q} outside [1, 100]")));
        }
        Ok(SlqConfig { qualities, block_size: crate::image::BLOCK_SIZE, seed })
    }

    pub fn with_default_qualities(seed: u64) -> Self {
        SlqConfig::new(DEFAULT_QUALITIES.to_vec(), seed).expect("default qualities are valid")
    }

    pub fn qualities(&self) -> &[u8] {
        &self.qualities
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Same qualities, different randomness; used to derive per-call seeds.
    pub fn reseeded(&self, seed: u64) -> Self {
        SlqConfig { qualities: self.qualities.clone(), block_size: self.block_size, seed }
    }
}

/// Which quality index each block was copied from, row-major over blocks.
/// Serializes as a bare array of arrays for debugging dumps.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ChoiceMap {
    pub rows: Vec<Vec<usize>>,
}

impl ChoiceMap {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("choice map serializes")
    }
}

/// Applies SLQ: JPEG round-trips the image at every configured quality, then
/// builds the output blockwise, copying each block from the candidate chosen
/// by a stream keyed on (seed, block row, block column).
pub fn slq_preprocess(img: &Image, cfg: &SlqConfig) -> Result<(Image, ChoiceMap)> {
    let candidates: Vec<_> = cfg
        .qualities
        .iter()
        .map(|&q| Ok(to_blocks(&jpeg_round_trip(img, q)?)))
        .collect::<Result<_>>()?;
    let mut grid = to_blocks(img);
    let mut rows = Vec::with_capacity(grid.blocks_y());
    for by in 0..grid.blocks_y() {
        let mut row = Vec::with_capacity(grid.blocks_x());
        for bx in 0..grid.blocks_x() {
            let mut rng = seeds::rng(cfg.seed, &[by as u64, bx as u64]);
            let idx = rng.random_range(0..cfg.qualities.len());
            *grid.block_mut(by, bx) = *candidates[idx].block(by, bx);
            row.push(idx);
        }
        rows.push(row);
    }
    Ok((from_blocks(&grid), ChoiceMap { rows }))
}

/// The deterministic stand-ins the adaptive attacker averages over instead of
/// SLQ's randomness: one full-image compression per quality.
pub fn slq_expected_logit_input(img: &Image, qualities: &[u8]) -> Result<Vec<Image>> {
    if qualities.is_empty() {
        return Err(Error::invalid("expected-logit quality list is empty"));
    }
    qualities.iter().map(|&q| jpeg_round_trip(img, q)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds;
    use rand::Rng;

    fn random_image(h: usize, w: usize, seed: u64) -> Image {
        let mut rng = seeds::rng(seed, &[0x51D]);
        Image::from_fn(h, w, |_, _| rng.random::<f64>()).unwrap()
    }

    #[test]
    fn config_validates_quality_list() {
        assert!(SlqConfig::new(vec![], 0).is_err());
        assert!(SlqConfig::new(vec![40, 20], 0).is_err());
        assert!(SlqConfig::new(vec![20, 20], 0).is_err());
        assert!(SlqConfig::new(vec![0, 20], 0).is_err());
        assert!(SlqConfig::new(vec![20, 101], 0).is_err());
        let cfg = SlqConfig::with_default_qualities(7);
        assert_eq!(cfg.qualities(), &[20, 40, 60, 80]);
        assert_eq!(cfg.block_size(), 8);
    }

    #[test]
    fn single_quality_reduces_to_plain_compression() {
        let img = random_image(24, 24, 1);
        let cfg = SlqConfig::new(vec![80], 9).unwrap();
        let (out, map) = slq_preprocess(&img, &cfg).unwrap();
        assert_eq!(out, jpeg_round_trip(&img, 80).unwrap());
        assert!(map.rows.iter().flatten().all(|&i| i == 0));
    }

    #[test]
    fn every_block_comes_verbatim_from_named_candidate() {
        let img = random_image(23, 37, 2);
        let cfg = SlqConfig::with_default_qualities(11);
        let (out, map) = slq_preprocess(&img, &cfg).unwrap();
        let candidates: Vec<_> = cfg
            .qualities()
            .iter()
            .map(|&q| to_blocks(&jpeg_round_trip(&img, q).unwrap()))
            .collect();
        let grid = to_blocks(&out);
        for by in 0..grid.blocks_y() {
            for bx in 0..grid.blocks_x() {
                let idx = map.rows[by][bx];
                assert_eq!(grid.block(by, bx), candidates[idx].block(by, bx), "block {by},{bx}");
                // And the named candidate is the provenance, not a lucky match
                // of all four: at least the chosen index must match exactly.
                assert!(idx < cfg.qualities().len());
            }
        }
    }

    #[test]
    fn identical_seeds_reproduce_identical_mosaics() {
        let img = random_image(32, 32, 3);
        let cfg = SlqConfig::with_default_qualities(21);
        let (a, ma) = slq_preprocess(&img, &cfg).unwrap();
        let (b, mb) = slq_preprocess(&img, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ma, mb);
    }

    #[test]
    fn different_seeds_give_different_choice_maps() {
        let img = random_image(32, 32, 4);
        let (_, ma) = slq_preprocess(&img, &SlqConfig::with_default_qualities(1)).unwrap();
        let (_, mb) = slq_preprocess(&img, &SlqConfig::with_default_qualities(2)).unwrap();
        assert_ne!(ma, mb);
    }

    #[test]
    fn choice_frequencies_are_uniform() {
        // 100 seeds x 100 blocks = 10,000 draws; each quality expects
        // n*p = 2500 with sigma = sqrt(n*p*(1-p)) ~ 43.3.
        let img = random_image(80, 80, 5);
        let mut counts = [0usize; 4];
        for seed in 0..100 {
            let cfg = SlqConfig::with_default_qualities(1000 + seed);
            let (_, map) = slq_preprocess(&img, &cfg).unwrap();
            for idx in map.rows.iter().flatten() {
                counts[*idx] += 1;
            }
        }
        let n = counts.iter().sum::<usize>();
        assert_eq!(n, 10_000);
        let sigma = (10_000.0f64 * 0.25 * 0.75).sqrt();
        for (i, &c) in counts.iter().enumerate() {
            let dev = (c as f64 - 2500.0).abs();
            assert!(dev <= 3.0 * sigma, "quality index {i} count {c} deviates {dev:.1}");
        }
    }

    #[test]
    fn choice_map_serializes_as_nested_arrays() {
        let map = ChoiceMap { rows: vec![vec![0, 3], vec![2, 1]] };
        assert_eq!(map.to_json(), "[[0,3],[2,1]]");
    }

    #[test]
    fn expected_logit_inputs_match_direct_codec_calls() {
        let img = random_image(16, 16, 6);
        let outs = slq_expected_logit_input(&img, &[20, 40, 60, 80]).unwrap();
        assert_eq!(outs.len(), 4);
        for (out, &q) in outs.iter().zip(&[20u8, 40, 60, 80]) {
            assert_eq!(*out, jpeg_round_trip(&img, q).unwrap());
        }
    }

    #[test]
    fn expected_logit_inputs_on_constant_image_nearly_agree() {
        let img = Image::constant(16, 16, 0.5).unwrap();
        let outs = slq_expected_logit_input(&img, &[20, 40, 60, 80]).unwrap();
        for pair in outs.windows(2) {
            let d = crate::image::linf_distance(&pair[0], &pair[1]).unwrap();
            assert!(d <= 2.0 / 255.0, "constant-image outputs diverge by {d}");
        }
    }

    #[test]
    fn expected_logit_inputs_reject_empty_list() {
        let img = random_image(8, 8, 7);
        assert!(slq_expected_logit_input(&img, &[]).is_err());
    }
}
