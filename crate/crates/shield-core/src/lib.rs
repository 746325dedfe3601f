//! Compression-based defense against adversarial images, the attacks that
//! try to break it, and a harness that measures who wins under different
//! levels of attacker knowledge.
//!
//! The defense preprocesses inputs with stochastic local quantization (each
//! 8x8 block is JPEG round-tripped at a randomly drawn quality) and then
//! majority-votes an ensemble of models trained on JPEG-compressed data.
//! The adaptive attacker differentiates through a smooth JPEG surrogate to
//! run targeted PGD/FGM against an averaged-logit view of the ensemble.
//!
//! Everything is deterministic given explicit seeds: same seeds, same bytes.
//! All rasters are single-channel `f64` planes in `[0, 1]`.

pub mod attack;
pub mod dataset;
pub mod defense;
pub mod diffjpeg;
pub mod error;
pub mod harness;
pub mod image;
pub mod jpeg;
pub mod nn;
pub mod seeds;
pub mod slq;

pub use error::{Error, Result};
pub use image::Image;
