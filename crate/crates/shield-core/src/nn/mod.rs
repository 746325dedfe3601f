//! A small convolutional classifier with hand-written forward and reverse
//! passes. The architecture is fixed: 32x32x1 input, two 3x3 same-padded
//! conv/relu/maxpool stages (8 then 16 filters), and a dense layer to 10
//! logits. Gradients are exact reverse-mode; no autograd framework.

mod checkpoint;
mod train;

pub use checkpoint::{checkpoint_to_bytes, load_checkpoint, save_checkpoint};
pub use train::{accuracy, train, Init, TrainConfig};

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Image, Plane};
use crate::seeds;

pub const CLASS_COUNT: usize = 10;
pub const INPUT_SIDE: usize = 32;
pub const KERNEL: usize = 3;
pub const CONV1_FILTERS: usize = 8;
pub const CONV2_FILTERS: usize = 16;
/// Flattened length after the second pool stage: 16 channels of 8x8.
pub const FLAT_LEN: usize = CONV2_FILTERS * (INPUT_SIDE / 4) * (INPUT_SIDE / 4);

const SIDE1: usize = INPUT_SIDE; // conv1 operates at 32x32
const SIDE2: usize = INPUT_SIDE / 2; // conv2 operates at 16x16

/// Describes the fixed architecture. Stored in checkpoints so a file from a
/// different layout is rejected instead of silently misread.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub input: [usize; 3],
    pub conv1_filters: usize,
    pub conv2_filters: usize,
    pub kernel: usize,
    pub classes: usize,
}

impl ModelSpec {
    pub fn canonical() -> Self {
        ModelSpec {
            input: [INPUT_SIDE, INPUT_SIDE, 1],
            conv1_filters: CONV1_FILTERS,
            conv2_filters: CONV2_FILTERS,
            kernel: KERNEL,
            classes: CLASS_COUNT,
        }
    }
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::canonical()
    }
}

/// How a model came to be: the shared pre-trained base, a fine-tune of that
/// base (derivative), or an independent from-scratch run (originative).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lineage {
    Base,
    Derivative,
    Originative,
}

/// All learnable parameters plus provenance. Weight layouts:
/// conv weights `[out_c][in_c][ky][kx]`, dense weights `[class][flat]`,
/// flatten order `channel*64 + y*8 + x`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub conv1_w: Vec<f64>,
    pub conv1_b: Vec<f64>,
    pub conv2_w: Vec<f64>,
    pub conv2_b: Vec<f64>,
    pub fc_w: Vec<f64>,
    pub fc_b: Vec<f64>,
    pub lineage: Lineage,
    pub train_quality: Option<u8>,
    pub train_seed: u64,
}

impl ModelParams {
    pub fn zeros() -> Self {
        ModelParams {
            conv1_w: vec![0.0; CONV1_FILTERS * KERNEL * KERNEL],
            conv1_b: vec![0.0; CONV1_FILTERS],
            conv2_w: vec![0.0; CONV2_FILTERS * CONV1_FILTERS * KERNEL * KERNEL],
            conv2_b: vec![0.0; CONV2_FILTERS],
            fc_w: vec![0.0; CLASS_COUNT * FLAT_LEN],
            fc_b: vec![0.0; CLASS_COUNT],
            lineage: Lineage::Base,
            train_quality: None,
            train_seed: 0,
        }
    }

    /// He-style initialization: weights ~ N(0, sqrt(2/fan_in)), biases zero.
    pub fn he_init(seed: u64) -> Self {
        let mut rng = seeds::rng(seed, &[0x1217]);
        let mut p = ModelParams::zeros();
        for (layer, fan_in) in [
            (&mut p.conv1_w, KERNEL * KERNEL),
            (&mut p.conv2_w, CONV1_FILTERS * KERNEL * KERNEL),
            (&mut p.fc_w, FLAT_LEN),
        ] {
            let dist = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("valid sigma");
            for w in layer.iter_mut() {
                *w = dist.sample(&mut rng);
            }
        }
        p.train_seed = seed;
        p
    }

    pub fn validate(&self) -> Result<()> {
        let shapes = [
            ("conv1_w", self.conv1_w.len(), CONV1_FILTERS * KERNEL * KERNEL),
            ("conv1_b", self.conv1_b.len(), CONV1_FILTERS),
            ("conv2_w", self.conv2_w.len(), CONV2_FILTERS * CONV1_FILTERS * KERNEL * KERNEL),
            ("conv2_b", self.conv2_b.len(), CONV2_FILTERS),
            ("fc_w", self.fc_w.len(), CLASS_COUNT * FLAT_LEN),
            ("fc_b", self.fc_b.len(), CLASS_COUNT),
        ];
        for (name, got, want) in shapes {
            if got != want {
                return Err(Error::shape(format!("{name} has {got} values, expected {want}")));
            }
        }
        Ok(())
    }

    /// Weight layers (biases excluded) in declaration order.
    pub fn weight_layers(&self) -> [&[f64]; 3] {
        [&self.conv1_w, &self.conv2_w, &self.fc_w]
    }

    /// All parameter arrays in checkpoint declaration order.
    pub fn all_arrays(&self) -> [&[f64]; 6] {
        [&self.conv1_w, &self.conv1_b, &self.conv2_w, &self.conv2_b, &self.fc_w, &self.fc_b]
    }

    pub(crate) fn all_arrays_mut(&mut self) -> [&mut Vec<f64>; 6] {
        [
            &mut self.conv1_w,
            &mut self.conv1_b,
            &mut self.conv2_w,
            &mut self.conv2_b,
            &mut self.fc_w,
            &mut self.fc_b,
        ]
    }
}

/// Gradients with the same shapes as the parameter arrays.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrads {
    pub conv1_w: Vec<f64>,
    pub conv1_b: Vec<f64>,
    pub conv2_w: Vec<f64>,
    pub conv2_b: Vec<f64>,
    pub fc_w: Vec<f64>,
    pub fc_b: Vec<f64>,
}

impl ParamGrads {
    pub fn zeros() -> Self {
        let p = ModelParams::zeros();
        ParamGrads {
            conv1_w: p.conv1_w,
            conv1_b: p.conv1_b,
            conv2_w: p.conv2_w,
            conv2_b: p.conv2_b,
            fc_w: p.fc_w,
            fc_b: p.fc_b,
        }
    }

    pub fn all_arrays(&self) -> [&[f64]; 6] {
        [&self.conv1_w, &self.conv1_b, &self.conv2_w, &self.conv2_b, &self.fc_w, &self.fc_b]
    }

    pub(crate) fn all_arrays_mut(&mut self) -> [&mut Vec<f64>; 6] {
        [
            &mut self.conv1_w,
            &mut self.conv1_b,
            &mut self.conv2_w,
            &mut self.conv2_b,
            &mut self.fc_w,
            &mut self.fc_b,
        ]
    }

    pub(crate) fn add(&mut self, other: &ParamGrads) {
        for (dst, src) in self.all_arrays_mut().into_iter().zip(other.all_arrays()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
    }

    pub(crate) fn scale(&mut self, s: f64) {
        for dst in self.all_arrays_mut() {
            for d in dst.iter_mut() {
                *d *= s;
            }
        }
    }
}

/// Same-padded 3x3 convolution, written as shifted row accumulations so the
/// inner loops stay contiguous.
fn conv3x3_same(input: &[f64], in_c: usize, side: usize, w: &[f64], b: &[f64], out: &mut [f64]) {
    let area = side * side;
    let out_c = b.len();
    for oc in 0..out_c {
        let out_plane = &mut out[oc * area..][..area];
        out_plane.fill(b[oc]);
        for ic in 0..in_c {
            let in_plane = &input[ic * area..][..area];
            for ky in 0..KERNEL {
                let dy = ky as isize - 1;
                for kx in 0..KERNEL {
                    let dx = kx as isize - 1;
                    let wv = w[((oc * in_c + ic) * KERNEL + ky) * KERNEL + kx];
                    let (y0, y1) = if dy < 0 { (1, side) } else if dy > 0 { (0, side - 1) } else { (0, side) };
                    let (x0, x1) = if dx < 0 { (1, side) } else if dx > 0 { (0, side - 1) } else { (0, side) };
                    for y in y0..y1 {
                        let iy = (y as isize + dy) as usize;
                        let ix = (x0 as isize + dx) as usize;
                        let dst = &mut out_plane[y * side + x0..y * side + x1];
                        let src = &in_plane[iy * side + ix..][..x1 - x0];
                        for (o, i) in dst.iter_mut().zip(src) {
                            *o += wv * i;
                        }
                    }
                }
            }
        }
    }
}

/// Transpose pass of `conv3x3_same`: scatters output cotangents back onto the
/// input, with the same shifted-row structure.
fn conv3x3_input_grad(d_out: &[f64], in_c: usize, side: usize, w: &[f64], out_c: usize, d_in: &mut [f64]) {
    let area = side * side;
    for oc in 0..out_c {
        let dout_plane = &d_out[oc * area..][..area];
        for ic in 0..in_c {
            let din_plane = &mut d_in[ic * area..][..area];
            for ky in 0..KERNEL {
                let dy = ky as isize - 1;
                for kx in 0..KERNEL {
                    let dx = kx as isize - 1;
                    let wv = w[((oc * in_c + ic) * KERNEL + ky) * KERNEL + kx];
                    let (y0, y1) = if dy < 0 { (1, side) } else if dy > 0 { (0, side - 1) } else { (0, side) };
                    let (x0, x1) = if dx < 0 { (1, side) } else if dx > 0 { (0, side - 1) } else { (0, side) };
                    for y in y0..y1 {
                        let iy = (y as isize + dy) as usize;
                        let ix = (x0 as isize + dx) as usize;
                        let dst = &mut din_plane[iy * side + ix..][..x1 - x0];
                        let src = &dout_plane[y * side + x0..y * side + x1];
                        for (i, o) in dst.iter_mut().zip(src) {
                            *i += wv * o;
                        }
                    }
                }
            }
        }
    }
}

/// Weight/bias gradients of `conv3x3_same` given output cotangents.
fn conv3x3_param_grad(
    input: &[f64],
    in_c: usize,
    side: usize,
    d_out: &[f64],
    out_c: usize,
    d_w: &mut [f64],
    d_b: &mut [f64],
) {
    let area = side * side;
    for oc in 0..out_c {
        let dout_plane = &d_out[oc * area..][..area];
        d_b[oc] += dout_plane.iter().sum::<f64>();
        for ic in 0..in_c {
            let in_plane = &input[ic * area..][..area];
            for ky in 0..KERNEL {
                let dy = ky as isize - 1;
                for kx in 0..KERNEL {
                    let dx = kx as isize - 1;
                    let (y0, y1) = if dy < 0 { (1, side) } else if dy > 0 { (0, side - 1) } else { (0, side) };
                    let (x0, x1) = if dx < 0 { (1, side) } else if dx > 0 { (0, side - 1) } else { (0, side) };
                    let mut acc = 0.0;
                    for y in y0..y1 {
                        let iy = (y as isize + dy) as usize;
                        let ix = (x0 as isize + dx) as usize;
                        let a = &dout_plane[y * side + x0..y * side + x1];
                        let v = &in_plane[iy * side + ix..][..x1 - x0];
                        acc += a.iter().zip(v).map(|(x, y)| x * y).sum::<f64>();
                    }
                    d_w[((oc * in_c + ic) * KERNEL + ky) * KERNEL + kx] += acc;
                }
            }
        }
    }
}

/// 2x2 max pool, stride 2, applied channelwise to relu(pre).
fn relu_maxpool(pre: &[f64], channels: usize, side: usize, out: &mut [f64]) {
    let half = side / 2;
    for c in 0..channels {
        let plane = &pre[c * side * side..][..side * side];
        let out_plane = &mut out[c * half * half..][..half * half];
        for py in 0..half {
            for px in 0..half {
                let mut best = 0.0f64; // relu floor
                for dy in 0..2 {
                    for dx in 0..2 {
                        best = best.max(plane[(2 * py + dy) * side + 2 * px + dx]);
                    }
                }
                out_plane[py * half + px] = best;
            }
        }
    }
}

/// Routes pool-output cotangents back to the argmax inputs. Ties and the relu
/// floor resolve exactly as in `relu_maxpool`: the first strictly greater
/// value in scan order wins; windows that never beat the relu floor get no
/// gradient (relu zeroes them).
fn relu_maxpool_grad(pre: &[f64], channels: usize, side: usize, d_out: &[f64], d_pre: &mut [f64]) {
    let half = side / 2;
    for c in 0..channels {
        let plane = &pre[c * side * side..][..side * side];
        let d_plane = &mut d_pre[c * side * side..][..side * side];
        let dout_plane = &d_out[c * half * half..][..half * half];
        for py in 0..half {
            for px in 0..half {
                let mut best = 0.0f64;
                let mut best_idx = None;
                for dy in 0..2 {
                    for dx in 0..2 {
                        let idx = (2 * py + dy) * side + 2 * px + dx;
                        if plane[idx] > best {
                            best = plane[idx];
                            best_idx = Some(idx);
                        }
                    }
                }
                if let Some(idx) = best_idx {
                    d_plane[idx] += dout_plane[py * half + px];
                }
            }
        }
    }
}

pub(crate) struct ForwardTrace {
    input: Vec<f64>,
    pre1: Vec<f64>,
    pooled1: Vec<f64>,
    pre2: Vec<f64>,
    pooled2: Vec<f64>,
    pub(crate) logits: [f64; CLASS_COUNT],
}

pub(crate) fn forward_trace(p: &ModelParams, input: &[f64]) -> Result<ForwardTrace> {
    p.validate()?;
    if input.len() != INPUT_SIDE * INPUT_SIDE {
        return Err(Error::shape(format!(
            "input has {} values, expected {}",
            input.len(),
            INPUT_SIDE * INPUT_SIDE
        )));
    }
    let mut pre1 = vec![0.0; CONV1_FILTERS * SIDE1 * SIDE1];
    conv3x3_same(input, 1, SIDE1, &p.conv1_w, &p.conv1_b, &mut pre1);
    let mut pooled1 = vec![0.0; CONV1_FILTERS * SIDE2 * SIDE2];
    relu_maxpool(&pre1, CONV1_FILTERS, SIDE1, &mut pooled1);

    let mut pre2 = vec![0.0; CONV2_FILTERS * SIDE2 * SIDE2];
    conv3x3_same(&pooled1, CONV1_FILTERS, SIDE2, &p.conv2_w, &p.conv2_b, &mut pre2);
    let mut pooled2 = vec![0.0; FLAT_LEN];
    relu_maxpool(&pre2, CONV2_FILTERS, SIDE2, &mut pooled2);

    let mut logits = [0.0; CLASS_COUNT];
    for (k, l) in logits.iter_mut().enumerate() {
        let row = &p.fc_w[k * FLAT_LEN..][..FLAT_LEN];
        *l = p.fc_b[k] + row.iter().zip(&pooled2).map(|(w, a)| w * a).sum::<f64>();
    }
    Ok(ForwardTrace { input: input.to_vec(), pre1, pooled1, pre2, pooled2, logits })
}

/// Logits for a raw pixel buffer; used where pre-clamp surrogate outputs flow
/// into the network.
pub(crate) fn forward_values(p: &ModelParams, values: &[f64]) -> Result<[f64; CLASS_COUNT]> {
    Ok(forward_trace(p, values)?.logits)
}

/// Classifier logits for an image.
pub fn forward(p: &ModelParams, img: &Image) -> Result<[f64; CLASS_COUNT]> {
    check_input_dims(img)?;
    forward_values(p, img.data())
}

fn check_input_dims(img: &Image) -> Result<()> {
    if img.height() != INPUT_SIDE || img.width() != INPUT_SIDE {
        return Err(Error::shape(format!(
            "input image is {}x{}, model expects {INPUT_SIDE}x{INPUT_SIDE}",
            img.height(),
            img.width()
        )));
    }
    Ok(())
}

pub(crate) fn backward_values(
    p: &ModelParams,
    values: &[f64],
    loss_grad: &[f64; CLASS_COUNT],
) -> Result<(ParamGrads, Vec<f64>)> {
    let trace = forward_trace(p, values)?;
    Ok(backward_from_trace(p, &trace, loss_grad))
}

/// Reverse pass over an existing trace; lets callers that already ran the
/// forward skip recomputing it.
pub(crate) fn backward_from_trace(
    p: &ModelParams,
    trace: &ForwardTrace,
    loss_grad: &[f64; CLASS_COUNT],
) -> (ParamGrads, Vec<f64>) {
    let mut grads = ParamGrads::zeros();

    grads.fc_b.copy_from_slice(loss_grad);
    let mut d_pooled2 = vec![0.0; FLAT_LEN];
    for k in 0..CLASS_COUNT {
        let g = loss_grad[k];
        let w_row = &p.fc_w[k * FLAT_LEN..][..FLAT_LEN];
        let gw_row = &mut grads.fc_w[k * FLAT_LEN..][..FLAT_LEN];
        for i in 0..FLAT_LEN {
            gw_row[i] = g * trace.pooled2[i];
            d_pooled2[i] += g * w_row[i];
        }
    }

    let mut d_pre2 = vec![0.0; CONV2_FILTERS * SIDE2 * SIDE2];
    relu_maxpool_grad(&trace.pre2, CONV2_FILTERS, SIDE2, &d_pooled2, &mut d_pre2);

    conv3x3_param_grad(
        &trace.pooled1,
        CONV1_FILTERS,
        SIDE2,
        &d_pre2,
        CONV2_FILTERS,
        &mut grads.conv2_w,
        &mut grads.conv2_b,
    );
    let mut d_pooled1 = vec![0.0; CONV1_FILTERS * SIDE2 * SIDE2];
    conv3x3_input_grad(&d_pre2, CONV1_FILTERS, SIDE2, &p.conv2_w, CONV2_FILTERS, &mut d_pooled1);

    let mut d_pre1 = vec![0.0; CONV1_FILTERS * SIDE1 * SIDE1];
    relu_maxpool_grad(&trace.pre1, CONV1_FILTERS, SIDE1, &d_pooled1, &mut d_pre1);

    conv3x3_param_grad(
        &trace.input,
        1,
        SIDE1,
        &d_pre1,
        CONV1_FILTERS,
        &mut grads.conv1_w,
        &mut grads.conv1_b,
    );
    let mut d_input = vec![0.0; SIDE1 * SIDE1];
    conv3x3_input_grad(&d_pre1, 1, SIDE1, &p.conv1_w, CONV1_FILTERS, &mut d_input);

    (grads, d_input)
}

/// Exact reverse-mode gradients of `forward` composed with the given logit
/// cotangent. Returns parameter gradients and the input-pixel gradient.
pub fn backward(
    p: &ModelParams,
    img: &Image,
    loss_grad: &[f64; CLASS_COUNT],
) -> Result<(ParamGrads, Plane)> {
    check_input_dims(img)?;
    let (grads, d_input) = backward_values(p, img.data(), loss_grad)?;
    Ok((grads, Plane { height: INPUT_SIDE, width: INPUT_SIDE, data: d_input }))
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64; CLASS_COUNT]) -> [f64; CLASS_COUNT] {
    let m = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let mut out = [0.0; CLASS_COUNT];
    let mut z = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - m).exp();
        z += *o;
    }
    for o in &mut out {
        *o /= z;
    }
    out
}

/// Cross-entropy of softmax(logits) against a target class. Returns the loss
/// and its gradient on the logits (softmax minus one-hot).
pub fn cross_entropy_loss(
    logits: &[f64; CLASS_COUNT],
    target: usize,
) -> Result<(f64, [f64; CLASS_COUNT])> {
    if target >= CLASS_COUNT {
        return Err(Error::invalid(format!("target class {target} outside [0, 9]")));
    }
    let m = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let log_z = logits.iter().map(|&l| (l - m).exp()).sum::<f64>().ln() + m;
    let loss = log_z - logits[target];
    let mut grad = softmax(logits);
    grad[target] -= 1.0;
    Ok((loss, grad))
}

/// Index of the largest logit, ties toward the lowest class.
pub fn argmax(logits: &[f64; CLASS_COUNT]) -> usize {
    let mut best = 0;
    for (k, &l) in logits.iter().enumerate() {
        if l > logits[best] {
            best = k;
        }
    }
    best
}

/// Cosine similarity of two parameter sets: each weight layer is flattened
/// and normalized to unit length, the normalized layers are concatenated, and
/// the cosine of the concatenations is returned. Per-layer normalization
/// makes the measure invariant to positive per-layer rescaling. Biases are
/// excluded.
pub fn weight_cosine_similarity(a: &ModelParams, b: &ModelParams) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    let (la, lb) = (a.weight_layers(), b.weight_layers());
    let mut total = 0.0;
    for (wa, wb) in la.into_iter().zip(lb) {
        let na = wa.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nb = wb.iter().map(|v| v * v).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            return Err(Error::invalid("zero-norm weight layer has no direction"));
        }
        let dot: f64 = wa.iter().zip(wb).map(|(x, y)| x * y).sum();
        total += dot / (na * nb);
    }
    Ok(total / la.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_params(seed: u64) -> ModelParams {
        ModelParams::he_init(seed)
    }

    fn random_image(seed: u64) -> Image {
        let mut rng = seeds::rng(seed, &[0x1316]);
        Image::from_fn(INPUT_SIDE, INPUT_SIDE, |_, _| rng.random::<f64>()).unwrap()
    }

    /// Plain nested-loop re-implementation of the whole forward pass, kept
    /// deliberately naive as the oracle.
    fn forward_naive(p: &ModelParams, img: &Image) -> [f64; CLASS_COUNT] {
        let get = |buf: &[f64], c: usize, side: usize, y: isize, x: isize| -> f64 {
            if y < 0 || x < 0 || y >= side as isize || x >= side as isize {
                0.0
            } else {
                buf[c * side * side + y as usize * side + x as usize]
            }
        };
        let conv = |input: &[f64], in_c: usize, side: usize, w: &[f64], b: &[f64]| -> Vec<f64> {
            let out_c = b.len();
            let mut out = vec![0.0; out_c * side * side];
            for oc in 0..out_c {
                for y in 0..side {
                    for x in 0..side {
                        let mut acc = b[oc];
                        for ic in 0..in_c {
                            for ky in 0..3 {
                                for kx in 0..3 {
                                    let wv = w[((oc * in_c + ic) * 3 + ky) * 3 + kx];
                                    acc += wv
                                        * get(
                                            input,
                                            ic,
                                            side,
                                            y as isize + ky as isize - 1,
                                            x as isize + kx as isize - 1,
                                        );
                                }
                            }
                        }
                        out[oc * side * side + y * side + x] = acc;
                    }
                }
            }
            out
        };
        let pool = |pre: &[f64], channels: usize, side: usize| -> Vec<f64> {
            let half = side / 2;
            let mut out = vec![0.0; channels * half * half];
            for c in 0..channels {
                for py in 0..half {
                    for px in 0..half {
                        let mut m = 0.0f64;
                        for dy in 0..2 {
                            for dx in 0..2 {
                                let v = pre[c * side * side + (2 * py + dy) * side + 2 * px + dx];
                                m = m.max(v.max(0.0));
                            }
                        }
                        out[c * half * half + py * half + px] = m;
                    }
                }
            }
            out
        };
        let a1 = pool(&conv(img.data(), 1, 32, &p.conv1_w, &p.conv1_b), CONV1_FILTERS, 32);
        let a2 = pool(&conv(&a1, CONV1_FILTERS, 16, &p.conv2_w, &p.conv2_b), CONV2_FILTERS, 16);
        let mut logits = [0.0; CLASS_COUNT];
        for k in 0..CLASS_COUNT {
            logits[k] = p.fc_b[k];
            for i in 0..FLAT_LEN {
                logits[k] += p.fc_w[k * FLAT_LEN + i] * a2[i];
            }
        }
        logits
    }

    #[test]
    fn zero_params_give_zero_logits() {
        let p = ModelParams::zeros();
        let logits = forward(&p, &random_image(1)).unwrap();
        assert_eq!(logits, [0.0; CLASS_COUNT]);
    }

    #[test]
    fn constant_bias_fixture_passes_through() {
        // Zero conv weights kill all activations, so the logits equal fc_b
        // regardless of input. Fixtures elsewhere rely on this.
        let mut p = ModelParams::zeros();
        p.fc_b = (0..10).map(|k| k as f64 * 0.125).collect();
        for seed in 0..3 {
            let logits = forward(&p, &random_image(seed)).unwrap();
            for (k, &l) in logits.iter().enumerate() {
                assert_eq!(l, k as f64 * 0.125);
            }
        }
    }

    #[test]
    fn forward_matches_naive_oracle() {
        for seed in 0..4 {
            let p = random_params(seed);
            let img = random_image(100 + seed);
            let fast = forward(&p, &img).unwrap();
            let naive = forward_naive(&p, &img);
            for k in 0..CLASS_COUNT {
                assert!((fast[k] - naive[k]).abs() < 1e-9, "seed {seed} class {k}");
            }
        }
    }

    #[test]
    fn forward_rejects_wrong_sizes() {
        let p = random_params(1);
        let img = Image::constant(16, 16, 0.5).unwrap();
        assert!(forward(&p, &img).is_err());
        let mut bad = random_params(1);
        bad.fc_w.pop();
        assert!(forward(&bad, &random_image(2)).is_err());
    }

    #[test]
    fn zero_cotangent_gives_zero_gradients() {
        let p = random_params(3);
        let (grads, d_in) = backward(&p, &random_image(4), &[0.0; CLASS_COUNT]).unwrap();
        assert!(grads.all_arrays().iter().all(|a| a.iter().all(|&v| v == 0.0)));
        assert!(d_in.data.iter().all(|&v| v == 0.0));
    }

    /// Central finite differences of the cross-entropy loss with respect to a
    /// chosen parameter entry.
    fn fd_param(p: &ModelParams, img: &Image, target: usize, layer: usize, idx: usize) -> f64 {
        let h = 1e-5;
        let eval = |delta: f64| {
            let mut q = p.clone();
            q.all_arrays_mut()[layer][idx] += delta;
            let logits = forward(&q, img).unwrap();
            cross_entropy_loss(&logits, target).unwrap().0
        };
        (eval(h) - eval(-h)) / (2.0 * h)
    }

    #[test]
    fn parameter_gradients_match_finite_differences() {
        let p = random_params(5);
        let img = random_image(6);
        let target = 3;
        let logits = forward(&p, &img).unwrap();
        let (_, dlogits) = cross_entropy_loss(&logits, target).unwrap();
        let (grads, _) = backward(&p, &img, &dlogits).unwrap();

        // Sample entries from every layer, plus all biases.
        let mut rng = seeds::rng(7, &[]);
        let mut fd_vec = Vec::new();
        let mut an_vec = Vec::new();
        let arrays = grads.all_arrays();
        for layer in 0..6 {
            let len = arrays[layer].len();
            let picks: Vec<usize> = if len <= 26 {
                (0..len).collect()
            } else {
                (0..30).map(|_| rng.random_range(0..len)).collect()
            };
            for idx in picks {
                fd_vec.push(fd_param(&p, &img, target, layer, idx));
                an_vec.push(arrays[layer][idx]);
            }
        }
        let err: f64 = fd_vec
            .iter()
            .zip(&an_vec)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let norm: f64 = an_vec.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err / norm.max(1e-12) < 1e-3, "relative error {}", err / norm);
    }

    #[test]
    fn input_gradient_matches_directional_finite_differences() {
        let p = random_params(8);
        let img = random_image(9);
        let target = 7;
        let logits = forward(&p, &img).unwrap();
        let (_, dlogits) = cross_entropy_loss(&logits, target).unwrap();
        let (_, d_in) = backward(&p, &img, &dlogits).unwrap();

        let mut rng = seeds::rng(10, &[]);
        let dir: Vec<f64> = (0..1024).map(|_| rng.random::<f64>() - 0.5).collect();
        let an: f64 = d_in.data.iter().zip(&dir).map(|(a, b)| a * b).sum();
        let h = 1e-5;
        let eval = |sgn: f64| {
            let data: Vec<f64> = img
                .data()
                .iter()
                .zip(&dir)
                .map(|(v, d)| (v + sgn * h * d).clamp(0.0, 1.0))
                .collect();
            let probe = Image::from_vec(32, 32, data).unwrap();
            cross_entropy_loss(&forward(&p, &probe).unwrap(), target).unwrap().0
        };
        let fd = (eval(1.0) - eval(-1.0)) / (2.0 * h);
        let rel = (fd - an).abs() / an.abs().max(1e-9);
        assert!(rel < 1e-3, "fd={fd} an={an} rel={rel}");
    }

    #[test]
    fn uniform_logits_loss_is_ln_ten() {
        let (loss, grad) = cross_entropy_loss(&[0.25; CLASS_COUNT], 4).unwrap();
        assert!((loss - 10.0f64.ln()).abs() < 1e-12);
        for (k, g) in grad.iter().enumerate() {
            let expect = if k == 4 { 0.1 - 1.0 } else { 0.1 };
            assert!((g - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn saturated_logits_loss_is_near_zero() {
        let mut logits = [0.0; CLASS_COUNT];
        logits[2] = 1000.0;
        let (loss, _) = cross_entropy_loss(&logits, 2).unwrap();
        assert!(loss.abs() < 1e-12);
        // And the max-subtraction keeps huge logits finite.
        assert!(loss.is_finite());
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let logits = [0.3, -1.2, 0.7, 2.1, -0.4, 0.0, 1.5, -2.0, 0.9, 0.2];
        let target = 6;
        let (_, grad) = cross_entropy_loss(&logits, target).unwrap();
        let h = 1e-6;
        for k in 0..CLASS_COUNT {
            let mut lp = logits;
            let mut lm = logits;
            lp[k] += h;
            lm[k] -= h;
            let fd = (cross_entropy_loss(&lp, target).unwrap().0
                - cross_entropy_loss(&lm, target).unwrap().0)
                / (2.0 * h);
            assert!((fd - grad[k]).abs() < 1e-6, "class {k}");
        }
    }

    #[test]
    fn loss_rejects_bad_target() {
        assert!(cross_entropy_loss(&[0.0; CLASS_COUNT], 10).is_err());
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.0; CLASS_COUNT]), 0);
        let mut l = [0.0; CLASS_COUNT];
        l[3] = 1.0;
        l[7] = 1.0;
        assert_eq!(argmax(&l), 3);
    }

    #[test]
    fn cosine_of_identical_params_is_one() {
        let p = random_params(11);
        assert!((weight_cosine_similarity(&p, &p).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_ignores_positive_per_layer_scale() {
        let p = random_params(12);
        let mut q = p.clone();
        for w in q.conv1_w.iter_mut() {
            *w *= 3.0;
        }
        for w in q.conv2_w.iter_mut() {
            *w *= 0.2;
        }
        for w in q.fc_w.iter_mut() {
            *w *= 42.0;
        }
        // Bias changes must not matter either.
        q.fc_b.iter_mut().for_each(|b| *b = 99.0);
        assert!((weight_cosine_similarity(&p, &q).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_is_symmetric() {
        let (a, b) = (random_params(13), random_params(14));
        let ab = weight_cosine_similarity(&a, &b).unwrap();
        let ba = weight_cosine_similarity(&b, &a).unwrap();
        assert_eq!(ab, ba);
    }

    #[test]
    fn independent_initializations_are_nearly_orthogonal() {
        for s in 0..10u64 {
            let a = random_params(1000 + 2 * s);
            let b = random_params(1001 + 2 * s);
            let c = weight_cosine_similarity(&a, &b).unwrap();
            assert!(c.abs() < 0.2, "seeds {s}: cosine {c}");
        }
    }

    #[test]
    fn cosine_rejects_zero_layers() {
        let z = ModelParams::zeros();
        let p = random_params(15);
        assert!(weight_cosine_similarity(&z, &p).is_err());
    }
}
