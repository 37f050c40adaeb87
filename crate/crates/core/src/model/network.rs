//! Reference classifier: conv3x3(16) → relu → maxpool2 → conv3x3(32) → relu → maxpool2
//! → dense(128) → relu → dense(K).
//!
//! Convolutions use "same" zero padding and are lowered to GEMM via im2col over the
//! whole batch. Inputs are raw pixel intensities and are scaled to `[0, 1]` on entry.

use rand::Rng;

use super::prob::{softmax_into, PROB_FLOOR};
use super::tensor::Tensor;
use crate::error::{Result, SaaError};
use crate::rng::{stream, Purpose};
use crate::scalar::{MatMut, MatRef, Scalar};

pub const CONV1_CHANNELS: usize = 16;
pub const CONV2_CHANNELS: usize = 32;
pub const HIDDEN_UNITS: usize = 128;

const PIXEL_SCALE: f64 = 1.0 / 255.0;

/// Input geometry and class count of the classifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ArchConfig {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub classes: usize,
}

impl ArchConfig {
    pub fn new(channels: usize, height: usize, width: usize, classes: usize) -> Result<Self> {
        let arch = ArchConfig { channels, height, width, classes };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.classes < 2 {
            return Err(SaaError::config(format!(
                "architecture needs ≥1 channel and ≥2 classes, got {self:?}"
            )));
        }
        if self.height < 4 || self.width < 4 || self.height % 4 != 0 || self.width % 4 != 0 {
            return Err(SaaError::config(format!(
                "input {}x{} must be a positive multiple of 4 on both sides",
                self.height, self.width
            )));
        }
        Ok(())
    }

    pub fn flat_features(&self) -> usize {
        CONV2_CHANNELS * (self.height / 4) * (self.width / 4)
    }

    pub fn image_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    /// Names and shapes of the parameter tensors, in storage order.
    pub fn layout(&self) -> Vec<(&'static str, Vec<usize>)> {
        vec![
            ("conv1.weight", vec![CONV1_CHANNELS, self.channels, 3, 3]),
            ("conv1.bias", vec![CONV1_CHANNELS]),
            ("conv2.weight", vec![CONV2_CHANNELS, CONV1_CHANNELS, 3, 3]),
            ("conv2.bias", vec![CONV2_CHANNELS]),
            ("fc1.weight", vec![HIDDEN_UNITS, self.flat_features()]),
            ("fc1.bias", vec![HIDDEN_UNITS]),
            ("fc2.weight", vec![self.classes, HIDDEN_UNITS]),
            ("fc2.bias", vec![self.classes]),
        ]
    }

    /// FNV-1a over the architecture description; stored in checkpoint headers.
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let words = [
            self.channels,
            self.height,
            self.width,
            self.classes,
            CONV1_CHANNELS,
            CONV2_CHANNELS,
            HIDDEN_UNITS,
        ];
        for w in words {
            for b in (w as u64).to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }
}

const CONV1_W: usize = 0;
const CONV1_B: usize = 1;
const CONV2_W: usize = 2;
const CONV2_B: usize = 3;
const FC1_W: usize = 4;
const FC1_B: usize = 5;
const FC2_W: usize = 6;
const FC2_B: usize = 7;

/// Named parameter tensors of the classifier. The same structure holds gradients
/// and optimizer velocity.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierParams<T> {
    arch: ArchConfig,
    names: Vec<&'static str>,
    tensors: Vec<Tensor<T>>,
    /// Bumped on every in-place update.
    pub version: u64,
}

impl<T: Scalar> ClassifierParams<T> {
    pub fn zeros(arch: ArchConfig) -> Self {
        let layout = arch.layout();
        ClassifierParams {
            arch,
            names: layout.iter().map(|(n, _)| *n).collect(),
            tensors: layout.into_iter().map(|(_, s)| Tensor::zeros(s)).collect(),
            version: 0,
        }
    }

    /// Kaiming-uniform (fan-in) weights, zero biases.
    pub fn init(arch: ArchConfig, seed: u64) -> Self {
        let mut params = Self::zeros(arch);
        let mut rng = stream(seed, Purpose::Init, 0, 0);
        for (name, t) in params.names.iter().zip(params.tensors.iter_mut()) {
            if name.ends_with(".bias") {
                continue;
            }
            let fan_in: usize = t.shape()[1..].iter().product();
            let bound = (6.0 / fan_in as f64).sqrt();
            for v in t.data_mut() {
                *v = T::lit(rng.gen_range(-bound..bound));
            }
        }
        params
    }

    /// Builds parameters from named tensors; every expected name must be present with its shape.
    pub fn from_named(arch: ArchConfig, named: Vec<(String, Tensor<T>)>) -> Result<Self> {
        let mut params = Self::zeros(arch);
        for (i, (name, shape)) in arch.layout().into_iter().enumerate() {
            let t = named
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, t)| t)
                .ok_or_else(|| SaaError::Shape(format!("missing parameter tensor {name}")))?;
            if t.shape() != shape.as_slice() {
                return Err(SaaError::Shape(format!(
                    "{name}: expected {shape:?}, got {:?}",
                    t.shape()
                )));
            }
            params.tensors[i] = t.clone();
        }
        Ok(params)
    }

    pub fn arch(&self) -> ArchConfig {
        self.arch
    }

    pub fn named(&self) -> impl Iterator<Item = (&'static str, &Tensor<T>)> {
        self.names.iter().copied().zip(self.tensors.iter())
    }

    pub fn tensors(&self) -> &[Tensor<T>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.names.iter().position(|n| *n == name).map(|i| &self.tensors[i])
    }

    pub fn num_values(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::all_finite)
    }

    pub fn same_structure(&self, other: &Self) -> bool {
        self.arch == other.arch
    }

    pub fn scale(&mut self, factor: T) {
        for t in &mut self.tensors {
            for v in t.data_mut() {
                *v *= factor;
            }
        }
    }

    pub fn cast<U: Scalar>(&self) -> ClassifierParams<U> {
        ClassifierParams {
            arch: self.arch,
            names: self.names.clone(),
            tensors: self.tensors.iter().map(Tensor::cast).collect(),
            version: self.version,
        }
    }

    fn w(&self, i: usize) -> &[T] {
        self.tensors[i].data()
    }
}

/// How a batch of logits is turned into the scalar being differentiated:
/// `Σ_i weight_i · H(onehot(target_i), softmax(logits_i))`.
#[derive(Clone, Debug)]
pub struct LossSpec<T> {
    pub targets: Vec<usize>,
    pub weights: Vec<T>,
}

impl<T: Scalar> LossSpec<T> {
    pub fn uniform(targets: Vec<usize>, weight: T) -> Self {
        let weights = vec![weight; targets.len()];
        LossSpec { targets, weights }
    }
}

/// Activations retained by a training forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache<T> {
    batch: usize,
    col1: Vec<T>,
    act1: Vec<T>,
    pool1_idx: Vec<u32>,
    col2: Vec<T>,
    act2: Vec<T>,
    pool2_idx: Vec<u32>,
    flat: Vec<T>,
    hidden: Vec<T>,
    pub logits: Tensor<T>,
}

/// Layout of a 4-D activation buffer for im2col: channel `c`, sample `n`, pixel `(y, x)`
/// lives at `c * chan_stride + n * sample_stride + y * width + x`.
#[derive(Clone, Copy)]
struct PlaneLayout {
    channels: usize,
    batch: usize,
    height: usize,
    width: usize,
    chan_stride: usize,
    sample_stride: usize,
}

/// 3x3 same-padding im2col. Output is `[channels·9, batch·height·width]`.
fn im2col<T: Scalar>(input: &[T], g: PlaneLayout, scale: T) -> Vec<T> {
    let hw = g.height * g.width;
    let cols = g.batch * hw;
    let mut out = vec![T::zero(); g.channels * 9 * cols];
    for c in 0..g.channels {
        for ky in 0..3 {
            for kx in 0..3 {
                let row = (c * 9 + ky * 3 + kx) * cols;
                for n in 0..g.batch {
                    let src = c * g.chan_stride + n * g.sample_stride;
                    let dst = row + n * hw;
                    for y in 0..g.height {
                        let sy = y as isize + ky as isize - 1;
                        if sy < 0 || sy >= g.height as isize {
                            continue;
                        }
                        let src_row = src + sy as usize * g.width;
                        let dst_row = dst + y * g.width;
                        // x range where x + kx - 1 stays inside [0, width)
                        let x0 = if kx == 0 { 1 } else { 0 };
                        let x1 = if kx == 2 { g.width - 1 } else { g.width };
                        for x in x0..x1 {
                            out[dst_row + x] = input[src_row + x + kx - 1] * scale;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Adjoint of [`im2col`] (without scaling) into a channel-major buffer.
fn col2im<T: Scalar>(cols_buf: &[T], g: PlaneLayout) -> Vec<T> {
    let hw = g.height * g.width;
    let cols = g.batch * hw;
    let mut out = vec![T::zero(); g.channels * g.chan_stride.max(g.batch * hw)];
    for c in 0..g.channels {
        for ky in 0..3 {
            for kx in 0..3 {
                let row = (c * 9 + ky * 3 + kx) * cols;
                for n in 0..g.batch {
                    let dst = c * g.chan_stride + n * g.sample_stride;
                    let src = row + n * hw;
                    for y in 0..g.height {
                        let sy = y as isize + ky as isize - 1;
                        if sy < 0 || sy >= g.height as isize {
                            continue;
                        }
                        let dst_row = dst + sy as usize * g.width;
                        let src_row = src + y * g.width;
                        let x0 = if kx == 0 { 1 } else { 0 };
                        let x1 = if kx == 2 { g.width - 1 } else { g.width };
                        for x in x0..x1 {
                            out[dst_row + x + kx - 1] += cols_buf[src_row + x];
                        }
                    }
                }
            }
        }
    }
    out
}

fn add_row_bias_relu<T: Scalar>(out: &mut [T], bias: &[T], row_len: usize) {
    for (row, &b) in out.chunks_mut(row_len).zip(bias) {
        for v in row {
            *v = (*v + b).max(T::zero());
        }
    }
}

/// 2x2 max pooling over `planes` contiguous planes of `height x width`.
/// Returns pooled values and the flat argmax index (first maximum in scan order).
fn maxpool2<T: Scalar>(input: &[T], planes: usize, height: usize, width: usize) -> (Vec<T>, Vec<u32>) {
    let (oh, ow) = (height / 2, width / 2);
    let mut out = Vec::with_capacity(planes * oh * ow);
    let mut idx = Vec::with_capacity(planes * oh * ow);
    for p in 0..planes {
        let base = p * height * width;
        for y in 0..oh {
            for x in 0..ow {
                let mut best = base + 2 * y * width + 2 * x;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let i = base + (2 * y + dy) * width + 2 * x + dx;
                    if input[i] > input[best] {
                        best = i;
                    }
                }
                out.push(input[best]);
                idx.push(best as u32);
            }
        }
    }
    (out, idx)
}

fn check_input<T: Scalar>(arch: &ArchConfig, images: &Tensor<T>) -> Result<usize> {
    let s = images.shape();
    if s.len() != 4 || s[1] != arch.channels || s[2] != arch.height || s[3] != arch.width || s[0] == 0 {
        return Err(SaaError::config(format!(
            "input batch shape {s:?} incompatible with architecture (N, {}, {}, {})",
            arch.channels, arch.height, arch.width
        )));
    }
    Ok(s[0])
}

/// Computes logits for a batch of images shaped `(N, C, H, W)` with raw pixel values.
pub fn forward<T: Scalar>(params: &ClassifierParams<T>, images: &Tensor<T>) -> Result<Tensor<T>> {
    Ok(forward_train(params, images)?.logits)
}

/// Forward pass that keeps the activations needed by [`backward_from_logits`].
pub fn forward_train<T: Scalar>(params: &ClassifierParams<T>, images: &Tensor<T>) -> Result<ForwardCache<T>> {
    let arch = params.arch;
    let n = check_input(&arch, images)?;
    let (h, w) = (arch.height, arch.width);
    let (h2, w2, h4, w4) = (h / 2, w / 2, h / 4, w / 4);

    let col1 = im2col(
        images.data(),
        PlaneLayout {
            channels: arch.channels,
            batch: n,
            height: h,
            width: w,
            chan_stride: h * w,
            sample_stride: arch.channels * h * w,
        },
        T::lit(PIXEL_SCALE),
    );
    let cols1 = n * h * w;
    let mut act1 = vec![T::zero(); CONV1_CHANNELS * cols1];
    T::gemm(
        T::one(),
        MatRef::new(params.w(CONV1_W), CONV1_CHANNELS, arch.channels * 9),
        MatRef::new(&col1, arch.channels * 9, cols1),
        T::zero(),
        MatMut::new(&mut act1, CONV1_CHANNELS, cols1),
    );
    add_row_bias_relu(&mut act1, params.w(CONV1_B), cols1);
    let (pool1, pool1_idx) = maxpool2(&act1, CONV1_CHANNELS * n, h, w);

    let cols2 = n * h2 * w2;
    let col2 = im2col(
        &pool1,
        PlaneLayout {
            channels: CONV1_CHANNELS,
            batch: n,
            height: h2,
            width: w2,
            chan_stride: cols2,
            sample_stride: h2 * w2,
        },
        T::one(),
    );
    let mut act2 = vec![T::zero(); CONV2_CHANNELS * cols2];
    T::gemm(
        T::one(),
        MatRef::new(params.w(CONV2_W), CONV2_CHANNELS, CONV1_CHANNELS * 9),
        MatRef::new(&col2, CONV1_CHANNELS * 9, cols2),
        T::zero(),
        MatMut::new(&mut act2, CONV2_CHANNELS, cols2),
    );
    add_row_bias_relu(&mut act2, params.w(CONV2_B), cols2);
    let (pool2, pool2_idx) = maxpool2(&act2, CONV2_CHANNELS * n, h2, w2);

    // [C, N, S] → [N, C·S]
    let s4 = h4 * w4;
    let features = arch.flat_features();
    let mut flat = vec![T::zero(); n * features];
    for c in 0..CONV2_CHANNELS {
        for i in 0..n {
            let src = (c * n + i) * s4;
            let dst = i * features + c * s4;
            flat[dst..dst + s4].copy_from_slice(&pool2[src..src + s4]);
        }
    }

    let mut hidden = vec![T::zero(); n * HIDDEN_UNITS];
    T::gemm(
        T::one(),
        MatRef::new(&flat, n, features),
        MatRef::new(params.w(FC1_W), HIDDEN_UNITS, features).t(),
        T::zero(),
        MatMut::new(&mut hidden, n, HIDDEN_UNITS),
    );
    for row in hidden.chunks_mut(HIDDEN_UNITS) {
        for (v, &b) in row.iter_mut().zip(params.w(FC1_B)) {
            *v = (*v + b).max(T::zero());
        }
    }

    let k = arch.classes;
    let mut logits = vec![T::zero(); n * k];
    T::gemm(
        T::one(),
        MatRef::new(&hidden, n, HIDDEN_UNITS),
        MatRef::new(params.w(FC2_W), k, HIDDEN_UNITS).t(),
        T::zero(),
        MatMut::new(&mut logits, n, k),
    );
    for row in logits.chunks_mut(k) {
        for (v, &b) in row.iter_mut().zip(params.w(FC2_B)) {
            *v += b;
        }
    }

    Ok(ForwardCache {
        batch: n,
        col1,
        act1,
        pool1_idx,
        col2,
        act2,
        pool2_idx,
        flat,
        hidden,
        logits: Tensor::new(vec![n, k], logits)?,
    })
}

fn row_sums<T: Scalar>(m: &[T], row_len: usize) -> Vec<T> {
    m.chunks(row_len).map(|r| r.iter().copied().sum()).collect()
}

/// Back-propagates `d loss / d logits` through the cached forward pass.
pub fn backward_from_logits<T: Scalar>(
    params: &ClassifierParams<T>,
    cache: &ForwardCache<T>,
    dlogits: &[T],
) -> Result<ClassifierParams<T>> {
    let arch = params.arch;
    let n = cache.batch;
    let k = arch.classes;
    if dlogits.len() != n * k {
        return Err(SaaError::Shape(format!(
            "logit gradient has {} values, expected {}",
            dlogits.len(),
            n * k
        )));
    }
    let (h, w) = (arch.height, arch.width);
    let (h2, w2, h4, w4) = (h / 2, w / 2, h / 4, w / 4);
    let features = arch.flat_features();
    let mut grads = ClassifierParams::zeros(arch);

    // fc2
    T::gemm(
        T::one(),
        MatRef::new(dlogits, n, k).t(),
        MatRef::new(&cache.hidden, n, HIDDEN_UNITS),
        T::zero(),
        MatMut::new(grads.tensors[FC2_W].data_mut(), k, HIDDEN_UNITS),
    );
    let db = column_sums(dlogits, k);
    grads.tensors[FC2_B].data_mut().copy_from_slice(&db);
    let mut dhidden = vec![T::zero(); n * HIDDEN_UNITS];
    T::gemm(
        T::one(),
        MatRef::new(dlogits, n, k),
        MatRef::new(params.w(FC2_W), k, HIDDEN_UNITS),
        T::zero(),
        MatMut::new(&mut dhidden, n, HIDDEN_UNITS),
    );
    for (d, &a) in dhidden.iter_mut().zip(&cache.hidden) {
        if a <= T::zero() {
            *d = T::zero();
        }
    }

    // fc1
    T::gemm(
        T::one(),
        MatRef::new(&dhidden, n, HIDDEN_UNITS).t(),
        MatRef::new(&cache.flat, n, features),
        T::zero(),
        MatMut::new(grads.tensors[FC1_W].data_mut(), HIDDEN_UNITS, features),
    );
    let db = column_sums(&dhidden, HIDDEN_UNITS);
    grads.tensors[FC1_B].data_mut().copy_from_slice(&db);
    let mut dflat = vec![T::zero(); n * features];
    T::gemm(
        T::one(),
        MatRef::new(&dhidden, n, HIDDEN_UNITS),
        MatRef::new(params.w(FC1_W), HIDDEN_UNITS, features),
        T::zero(),
        MatMut::new(&mut dflat, n, features),
    );

    // unflatten + pool2 + relu2
    let s4 = h4 * w4;
    let cols2 = n * h2 * w2;
    let mut dact2 = vec![T::zero(); CONV2_CHANNELS * cols2];
    for c in 0..CONV2_CHANNELS {
        for i in 0..n {
            for s in 0..s4 {
                let pooled = (c * n + i) * s4 + s;
                let src = cache.pool2_idx[pooled] as usize;
                dact2[src] += dflat[i * features + c * s4 + s];
            }
        }
    }
    for (d, &a) in dact2.iter_mut().zip(&cache.act2) {
        if a <= T::zero() {
            *d = T::zero();
        }
    }

    // conv2
    T::gemm(
        T::one(),
        MatRef::new(&dact2, CONV2_CHANNELS, cols2),
        MatRef::new(&cache.col2, CONV1_CHANNELS * 9, cols2).t(),
        T::zero(),
        MatMut::new(grads.tensors[CONV2_W].data_mut(), CONV2_CHANNELS, CONV1_CHANNELS * 9),
    );
    grads.tensors[CONV2_B].data_mut().copy_from_slice(&row_sums(&dact2, cols2));
    let mut dcol2 = vec![T::zero(); CONV1_CHANNELS * 9 * cols2];
    T::gemm(
        T::one(),
        MatRef::new(params.w(CONV2_W), CONV2_CHANNELS, CONV1_CHANNELS * 9).t(),
        MatRef::new(&dact2, CONV2_CHANNELS, cols2),
        T::zero(),
        MatMut::new(&mut dcol2, CONV1_CHANNELS * 9, cols2),
    );
    let dpool1 = col2im(
        &dcol2,
        PlaneLayout {
            channels: CONV1_CHANNELS,
            batch: n,
            height: h2,
            width: w2,
            chan_stride: cols2,
            sample_stride: h2 * w2,
        },
    );

    // pool1 + relu1
    let cols1 = n * h * w;
    let mut dact1 = vec![T::zero(); CONV1_CHANNELS * cols1];
    for (pooled, &src) in cache.pool1_idx.iter().enumerate() {
        dact1[src as usize] += dpool1[pooled];
    }
    for (d, &a) in dact1.iter_mut().zip(&cache.act1) {
        if a <= T::zero() {
            *d = T::zero();
        }
    }

    // conv1
    T::gemm(
        T::one(),
        MatRef::new(&dact1, CONV1_CHANNELS, cols1),
        MatRef::new(&cache.col1, arch.channels * 9, cols1).t(),
        T::zero(),
        MatMut::new(grads.tensors[CONV1_W].data_mut(), CONV1_CHANNELS, arch.channels * 9),
    );
    grads.tensors[CONV1_B].data_mut().copy_from_slice(&row_sums(&dact1, cols1));

    Ok(grads)
}

fn column_sums<T: Scalar>(m: &[T], row_len: usize) -> Vec<T> {
    let mut out = vec![T::zero(); row_len];
    for row in m.chunks(row_len) {
        for (o, &v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    out
}

/// Weighted clamped cross entropy of a logit batch and its gradient w.r.t. the logits.
///
/// Rows whose target probability sits below the clamp floor get zero gradient, matching
/// the flat region of the clamped loss.
pub fn weighted_ce_with_grad<T: Scalar>(logits: &Tensor<T>, spec: &LossSpec<T>) -> Result<(T, Vec<T>, Vec<T>)> {
    let n = logits.shape()[0];
    let k = logits.shape()[1];
    if spec.targets.len() != n || spec.weights.len() != n {
        return Err(SaaError::Shape(format!(
            "loss spec covers {} targets / {} weights for batch {n}",
            spec.targets.len(),
            spec.weights.len()
        )));
    }
    let floor = T::lit(PROB_FLOOR);
    let mut dlogits = vec![T::zero(); n * k];
    let mut per_row = Vec::with_capacity(n);
    let mut total = T::zero();
    for (i, (row, drow)) in logits.rows().zip(dlogits.chunks_mut(k)).enumerate() {
        let target = spec.targets[i];
        if target >= k {
            return Err(SaaError::invalid(format!("target class {target} ≥ {k}")));
        }
        softmax_into(row, drow);
        let p = drow[target];
        let loss = -p.max(floor).ln();
        per_row.push(loss);
        let weight = spec.weights[i];
        total += weight * loss;
        if p < floor || weight == T::zero() {
            drow.iter_mut().for_each(|d| *d = T::zero());
        } else {
            drow[target] -= T::one();
            drow.iter_mut().for_each(|d| *d *= weight);
        }
    }
    Ok((total, per_row, dlogits))
}

/// Gradient of `Σ_i w_i · H(onehot(t_i), softmax(f(x_i)))` with respect to every parameter.
///
/// Returns the loss value alongside the gradients.
pub fn backward<T: Scalar>(
    params: &ClassifierParams<T>,
    images: &Tensor<T>,
    spec: &LossSpec<T>,
) -> Result<(T, ClassifierParams<T>)> {
    let cache = forward_train(params, images)?;
    let (loss, _, dlogits) = weighted_ce_with_grad(&cache.logits, spec)?;
    if !loss.is_finite() {
        return Err(SaaError::NonFinite { iteration: 0, sample_ids: Vec::new() });
    }
    let grads = backward_from_logits(params, &cache, &dlogits)?;
    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arch() -> ArchConfig {
        ArchConfig::new(2, 8, 8, 3).unwrap()
    }

    fn batch<T: Scalar>(arch: &ArchConfig, n: usize, seed: u64) -> Tensor<T> {
        let mut rng = stream(seed, Purpose::Synthetic, 0, 0);
        let data = (0..n * arch.image_len()).map(|_| T::lit(rng.gen_range(0.0..255.0))).collect();
        Tensor::new(vec![n, arch.channels, arch.height, arch.width], data).unwrap()
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(ArchConfig::new(1, 6, 8, 2).is_err());
        assert!(ArchConfig::new(1, 8, 8, 1).is_err());
        let p = ClassifierParams::<f32>::init(arch(), 0);
        let wrong = Tensor::<f32>::zeros(vec![1, 1, 8, 8]);
        assert!(matches!(forward(&p, &wrong), Err(SaaError::Config { .. })));
    }

    #[test]
    fn zero_params_give_constant_rows() {
        let a = arch();
        let p = ClassifierParams::<f32>::zeros(a);
        let logits = forward(&p, &batch(&a, 3, 1)).unwrap();
        assert_eq!(logits.shape(), &[3, 3]);
        assert!(logits.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn batch_rows_are_independent() {
        let a = arch();
        let p = ClassifierParams::<f32>::init(a, 5);
        let one = batch::<f32>(&a, 1, 2);
        let two = Tensor::stack(&[
            Tensor::new(vec![2, 8, 8], one.data().to_vec()).unwrap(),
            Tensor::new(vec![2, 8, 8], one.data().to_vec()).unwrap(),
        ])
        .unwrap();
        let l1 = forward(&p, &one).unwrap();
        let l2 = forward(&p, &two).unwrap();
        assert_eq!(l2.row(0), l2.row(1));
        assert_eq!(l1.row(0), l2.row(0));
    }

    #[test]
    fn init_is_seeded_kaiming_uniform() {
        let a = arch();
        let p = ClassifierParams::<f64>::init(a, 9);
        assert_eq!(p, ClassifierParams::<f64>::init(a, 9));
        assert_ne!(p, ClassifierParams::<f64>::init(a, 10));
        let w = p.get("conv2.weight").unwrap();
        let bound = (6.0f64 / (16.0 * 9.0)).sqrt();
        assert!(w.data().iter().all(|v| v.abs() < bound));
        assert!(p.get("fc2.bias").unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unused_logit_weight_gets_zero_gradient() {
        let a = arch();
        let p = ClassifierParams::<f64>::init(a, 3);
        let x = batch::<f64>(&a, 2, 4);
        // Zero weights on every row: loss is independent of all parameters.
        let spec = LossSpec { targets: vec![0, 1], weights: vec![0.0, 0.0] };
        let (_, g) = backward(&p, &x, &spec).unwrap();
        assert!(g.tensors().iter().all(|t| t.data().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn doubling_loss_weight_doubles_gradient() {
        let a = arch();
        let p = ClassifierParams::<f64>::init(a, 3);
        let x = batch::<f64>(&a, 2, 4);
        let (l1, g1) = backward(&p, &x, &LossSpec::uniform(vec![0, 2], 0.5)).unwrap();
        let (l2, g2) = backward(&p, &x, &LossSpec::uniform(vec![0, 2], 1.0)).unwrap();
        assert_eq!(l2, 2.0 * l1);
        for (a, b) in g1.tensors().iter().zip(g2.tensors()) {
            for (x, y) in a.data().iter().zip(b.data()) {
                assert_eq!(2.0 * x, *y);
            }
        }
    }

    #[test]
    fn arch_hash_distinguishes_geometry() {
        let a = ArchConfig::new(1, 16, 16, 4).unwrap();
        let b = ArchConfig::new(3, 16, 16, 4).unwrap();
        assert_eq!(a.hash(), ArchConfig::new(1, 16, 16, 4).unwrap().hash());
        assert_ne!(a.hash(), b.hash());
    }
}
