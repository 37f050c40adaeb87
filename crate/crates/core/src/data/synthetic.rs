//! Grating-pattern classification task.
//!
//! Class `k` uses pattern family `k % 4` (horizontal stripes, vertical stripes, checkerboard,
//! concentric rings) at `2 + k / 4` cycles per image side. A horizontal flip maps every
//! pattern onto a phase-shifted copy of itself, so weak augmentation never changes the class.

use std::f64::consts::PI;

use rand::Rng;

use super::{Dataset, SplitTag};
use crate::augment::Image;
use crate::error::{Result, SaaError};
use crate::rng::{stream, Purpose};

pub const MAX_SYNTHETIC_CLASSES: usize = 16;
const PATTERN_AMPLITUDE: f64 = 100.0;

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub classes: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub side: usize,
    /// Uniform pixel noise is drawn from `[-noise, noise]`.
    pub noise: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec { seed: 0, classes: 4, n_train: 2000, n_test: 1000, side: 16, noise: 25.0 }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if !(2..=MAX_SYNTHETIC_CLASSES).contains(&self.classes) {
            return Err(SaaError::config(format!(
                "synthetic class count {} outside [2, {MAX_SYNTHETIC_CLASSES}]",
                self.classes
            )));
        }
        if self.side < 4 || self.side % 4 != 0 {
            return Err(SaaError::config(format!("synthetic side {} must be a positive multiple of 4", self.side)));
        }
        if self.n_train == 0 || self.n_test == 0 {
            return Err(SaaError::config("synthetic train and test sizes must be positive"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(SaaError::config(format!("synthetic noise {} must be finite and ≥ 0", self.noise)));
        }
        Ok(())
    }
}

/// Noise-free template of class `k`, pixel values in `[27.5, 227.5]`.
pub fn template(class: usize, side: usize) -> Vec<f64> {
    let cycles = (2 + class / 4) as f64;
    let w = 2.0 * PI * cycles / side as f64;
    let c = (side as f64 - 1.0) / 2.0;
    let mut out = Vec::with_capacity(side * side);
    for y in 0..side {
        for x in 0..side {
            let (fy, fx) = (y as f64, x as f64);
            let p = match class % 4 {
                0 => (w * fy).cos(),
                1 => (w * fx).cos(),
                2 => (w * fy).cos() * (w * fx).cos(),
                _ => (w * ((fy - c).powi(2) + (fx - c).powi(2)).sqrt()).cos(),
            };
            out.push(127.5 + PATTERN_AMPLITUDE * p);
        }
    }
    out
}

fn generate(spec: &SyntheticSpec, n: usize, split: SplitTag) -> Result<Dataset> {
    let templates: Vec<Vec<f64>> = (0..spec.classes).map(|k| template(k, spec.side)).collect();
    let split_key = match split {
        SplitTag::Train => 0,
        SplitTag::Test => 1,
    };
    let mut images = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % spec.classes;
        let mut rng = stream(spec.seed, Purpose::Synthetic, split_key, i as u64);
        let pixels: Vec<f32> = templates[class]
            .iter()
            .map(|&t| {
                let noise = if spec.noise > 0.0 { rng.gen_range(-spec.noise..=spec.noise) } else { 0.0 };
                (t + noise).round().clamp(0.0, 255.0) as f32
            })
            .collect();
        images.push(Image::new(1, spec.side, spec.side, pixels)?);
        labels.push(class);
    }
    Dataset::new(images, Some(labels), spec.classes, split)
}

pub fn gen_synthetic_spec(spec: &SyntheticSpec) -> Result<(Dataset, Dataset)> {
    spec.validate()?;
    Ok((generate(spec, spec.n_train, SplitTag::Train)?, generate(spec, spec.n_test, SplitTag::Test)?))
}

/// Balanced `(train, test)` sets with noise amplitude 25.
pub fn gen_synthetic(seed: u64, classes: usize, n_train: usize, n_test: usize, side: usize) -> Result<(Dataset, Dataset)> {
    gen_synthetic_spec(&SyntheticSpec { seed, classes, n_train, n_test, side, noise: 25.0 })
}
