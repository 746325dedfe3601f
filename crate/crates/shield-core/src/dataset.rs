//! Synthetic 10-class image generation and the ADVD binary container.
//!
//! The classes are parametric pattern families (bars at four angles, disks of
//! two radii, checkerboards of two frequencies, two radial gradients) with
//! seeded jitter in position, contrast, and additive noise. Small models
//! separate them reliably, which is all the evaluation harness needs.
//!
//! Container layout: magic "ADVD", version 0x01, u32 LE record count, u16 LE
//! height, u16 LE width, u8 channel count (always 1); then per record one u8
//! label followed by height*width pixel bytes storing round(v*255).

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{ContainerErrorKind, Error, Result};
use crate::image::Image;
use crate::seeds;

pub const IMAGE_SIDE: usize = 32;
pub const CLASS_COUNT: usize = 10;

const MAGIC: &[u8; 4] = b"ADVD";
const VERSION: u8 = 0x01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Eval,
}

impl SplitTag {
    fn stream_tag(self) -> u64 {
        match self {
            SplitTag::Train => 0,
            SplitTag::Eval => 1,
        }
    }
}

/// Images with labels. All images share one size; labels are classes 0..=9.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    images: Vec<Image>,
    labels: Vec<u8>,
    split: SplitTag,
}

impl LabeledDataset {
    pub fn new(images: Vec<Image>, labels: Vec<u8>, split: SplitTag) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::shape(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        if let Some(&l) = labels.iter().find(|&&l| l as usize >= CLASS_COUNT) {
            return Err(Error::invalid(format!("label {l} outside [0, 9]")));
        }
        if let Some(first) = images.first() {
            if images.iter().any(|img| !img.same_dims(first)) {
                return Err(Error::shape("dataset images differ in size".to_string()));
            }
        }
        Ok(LabeledDataset { images, labels, split })
    }

    pub fn images(&self) -> &[Image] {
        &self.images
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn split(&self) -> SplitTag {
        self.split
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// The first `n` records as a new dataset (all records if `n` is larger).
    pub fn take_prefix(&self, n: usize) -> LabeledDataset {
        let n = n.min(self.len());
        LabeledDataset {
            images: self.images[..n].to_vec(),
            labels: self.labels[..n].to_vec(),
            split: self.split,
        }
    }

    /// Same records under a different split tag.
    pub fn with_split(&self, split: SplitTag) -> LabeledDataset {
        LabeledDataset { images: self.images.clone(), labels: self.labels.clone(), split }
    }

    /// Per-class record counts.
    pub fn class_counts(&self) -> [usize; CLASS_COUNT] {
        let mut counts = [0; CLASS_COUNT];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }
}

fn synth_image(class: usize, rng: &mut impl Rng) -> Image {
    let side = IMAGE_SIDE as f64;
    // Contrast is kept moderate on purpose: pattern amplitude sets the
    // input-space class margins, and these bands place them near the default
    // attack budget so defense/attack comparisons operate mid-curve rather
    // than saturating at either end.
    let bg = 0.28 + 0.14 * rng.random::<f64>();
    let fg = 0.56 + 0.14 * rng.random::<f64>();
    let cy = (side - 1.0) / 2.0 + 6.0 * (rng.random::<f64>() - 0.5);
    let cx = (side - 1.0) / 2.0 + 6.0 * (rng.random::<f64>() - 0.5);
    let shade: Box<dyn Fn(f64, f64) -> f64> = match class {
        // Bars at 0/45/90/135 degrees through the jittered center.
        0..=3 => {
            let theta = class as f64 * std::f64::consts::FRAC_PI_4;
            let (ny, nx) = (theta.cos(), -theta.sin());
            let half_width = 1.5 + rng.random::<f64>();
            Box::new(move |y, x| {
                let d = ((y - cy) * ny + (x - cx) * nx).abs();
                if d <= half_width {
                    fg
                } else {
                    bg
                }
            })
        }
        // Filled disks, small and large.
        4 | 5 => {
            let r = if class == 4 { 5.0 } else { 9.0 } + 2.0 * (rng.random::<f64>() - 0.5);
            Box::new(move |y, x| {
                if ((y - cy).powi(2) + (x - cx).powi(2)).sqrt() <= r {
                    fg
                } else {
                    bg
                }
            })
        }
        // Checkerboards, fine and coarse.
        6 | 7 => {
            let cell = if class == 6 { 4.0 } else { 8.0 };
            let py = cell * rng.random::<f64>();
            let px = cell * rng.random::<f64>();
            Box::new(move |y, x| {
                let parity = (((y + py) / cell).floor() + ((x + px) / cell).floor()) as i64 & 1;
                if parity == 0 {
                    fg
                } else {
                    bg
                }
            })
        }
        // Radial gradients: bright-centered and dark-centered.
        8 | 9 => {
            let dmax = side * std::f64::consts::SQRT_2 / 2.0;
            Box::new(move |y, x| {
                let t = (((y - cy).powi(2) + (x - cx).powi(2)).sqrt() / dmax).min(1.0);
                if class == 8 {
                    fg - (fg - bg) * t
                } else {
                    bg + (fg - bg) * t
                }
            })
        }
        _ => unreachable!("class {class} out of range"),
    };
    let noise = Normal::new(0.0, 0.05).expect("valid sigma");
    Image::from_fn(IMAGE_SIDE, IMAGE_SIDE, |y, x| {
        (shade(y as f64, x as f64) + noise.sample(rng)).clamp(0.0, 1.0)
    })
    .expect("clamped values are valid pixels")
}

/// Generates `count` labeled images, classes assigned round-robin so every
/// class appears floor(count/10) or ceil(count/10) times. Each record draws
/// from its own stream keyed by (seed, split, index), so record i is the same
/// regardless of count.
pub fn generate_synthetic(count: usize, seed: u64, split: SplitTag) -> Result<LabeledDataset> {
    if count < 1 {
        return Err(Error::invalid("dataset count must be at least 1"));
    }
    let mut images = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let class = i % CLASS_COUNT;
        let mut rng = seeds::rng(seed, &[split.stream_tag(), i as u64]);
        images.push(synth_image(class, &mut rng));
        labels.push(class as u8);
    }
    LabeledDataset::new(images, labels, split)
}

/// Serializes a dataset to container bytes.
pub fn to_bytes(ds: &LabeledDataset) -> Result<Vec<u8>> {
    let first = ds
        .images
        .first()
        .ok_or_else(|| Error::invalid("cannot serialize an empty dataset"))?;
    let (h, w) = (first.height(), first.width());
    if h > u16::MAX as usize || w > u16::MAX as usize {
        return Err(Error::invalid(format!("image size {h}x{w} exceeds container limits")));
    }
    let mut out = Vec::with_capacity(14 + ds.len() * (1 + h * w));
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(ds.len() as u32).to_le_bytes());
    out.extend_from_slice(&(h as u16).to_le_bytes());
    out.extend_from_slice(&(w as u16).to_le_bytes());
    out.push(1);
    for (img, &label) in ds.images.iter().zip(&ds.labels) {
        out.push(label);
        out.extend(img.data().iter().map(|&v| (v * 255.0).round() as u8));
    }
    Ok(out)
}

/// Parses container bytes. The split tag is not stored in the format; loaded
/// datasets are tagged `Eval` and can be re-tagged with `with_split`.
pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<LabeledDataset> {
    let bad = |kind| Error::container(origin, kind);
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(bad(ContainerErrorKind::BadMagic));
    }
    if bytes.len() < 14 {
        return Err(bad(ContainerErrorKind::Truncated));
    }
    if bytes[4] != VERSION {
        return Err(bad(ContainerErrorKind::UnsupportedVersion(bytes[4])));
    }
    let count = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let h = u16::from_le_bytes(bytes[9..11].try_into().unwrap()) as usize;
    let w = u16::from_le_bytes(bytes[11..13].try_into().unwrap()) as usize;
    let channels = bytes[13];
    if channels != 1 {
        return Err(bad(ContainerErrorKind::BadChannelCount(channels)));
    }
    if count > 0 && (h == 0 || w == 0) {
        return Err(bad(ContainerErrorKind::BadDimensions));
    }
    let record = 1 + h * w;
    let mut offset = 14;
    let mut images = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for _ in 0..count {
        if bytes.len() < offset + record {
            return Err(bad(ContainerErrorKind::Truncated));
        }
        let label = bytes[offset];
        if label as usize >= CLASS_COUNT {
            return Err(bad(ContainerErrorKind::LabelOutOfRange(label)));
        }
        let data = bytes[offset + 1..offset + record]
            .iter()
            .map(|&b| b as f64 / 255.0)
            .collect();
        images.push(Image::from_vec(h, w, data)?);
        labels.push(label);
        offset += record;
    }
    if offset != bytes.len() {
        return Err(bad(ContainerErrorKind::TrailingData));
    }
    LabeledDataset::new(images, labels, SplitTag::Eval)
}

pub fn write_container(ds: &LabeledDataset, path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(ds)?).map_err(|e| Error::io(path, e))
}

pub fn read_container(path: &Path) -> Result<LabeledDataset> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes, path)
}
