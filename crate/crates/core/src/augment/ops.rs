//! RandAugment-style primitives with closed-form pixel mappings.
//!
//! Magnitude `m ∈ [0, 1]` maps to each op's parameter as follows (`s = -1` when the spec
//! is negated, else `+1`):
//!
//! | op            | parameter                                     |
//! |---------------|-----------------------------------------------|
//! | identity      | none                                          |
//! | autocontrast  | none (per-channel min/max stretch)            |
//! | equalize      | none (per-channel histogram equalization)     |
//! | rotate        | angle `s·30°·m`                               |
//! | solarize      | invert values `≥ 256·(1 − m)`                 |
//! | posterize     | keep `8 − round(7m)` bits                     |
//! | brightness    | factor `1 + s·0.9·m`                          |
//! | contrast      | factor `1 + s·0.9·m` around the mean          |
//! | sharpness     | factor `1 + s·0.9·m` against a 3x3 smoothing  |
//! | shear_x/y     | shear `s·0.3·m`                               |
//! | translate_x/y | shift `round(s·0.3·m·side)` pixels            |
//!
//! Geometric ops resample with nearest neighbour and mirror-reflect out-of-range
//! coordinates (edge pixel not repeated).

use std::fmt;
use std::str::FromStr;

use super::image::Image;
use crate::error::{Result, SaaError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StrongOp {
    Identity,
    AutoContrast,
    Equalize,
    Rotate,
    Solarize,
    Posterize,
    Brightness,
    Contrast,
    Sharpness,
    ShearX,
    ShearY,
    TranslateX,
    TranslateY,
}

impl StrongOp {
    pub const ALL: [StrongOp; 13] = [
        StrongOp::Identity,
        StrongOp::AutoContrast,
        StrongOp::Equalize,
        StrongOp::Rotate,
        StrongOp::Solarize,
        StrongOp::Posterize,
        StrongOp::Brightness,
        StrongOp::Contrast,
        StrongOp::Sharpness,
        StrongOp::ShearX,
        StrongOp::ShearY,
        StrongOp::TranslateX,
        StrongOp::TranslateY,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrongOp::Identity => "identity",
            StrongOp::AutoContrast => "autocontrast",
            StrongOp::Equalize => "equalize",
            StrongOp::Rotate => "rotate",
            StrongOp::Solarize => "solarize",
            StrongOp::Posterize => "posterize",
            StrongOp::Brightness => "brightness",
            StrongOp::Contrast => "contrast",
            StrongOp::Sharpness => "sharpness",
            StrongOp::ShearX => "shear_x",
            StrongOp::ShearY => "shear_y",
            StrongOp::TranslateX => "translate_x",
            StrongOp::TranslateY => "translate_y",
        }
    }
}

impl fmt::Display for StrongOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrongOp {
    type Err = SaaError;

    fn from_str(s: &str) -> Result<Self> {
        StrongOp::ALL
            .into_iter()
            .find(|op| op.name() == s)
            .ok_or_else(|| SaaError::config(format!("unknown augmentation op `{s}`")))
    }
}

/// One primitive application.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugSpec {
    pub op: StrongOp,
    pub magnitude: f32,
    /// Direction of signed parameters (rotation, shear, translation, enhancement factors).
    pub negate: bool,
}

impl AugSpec {
    pub fn new(op: StrongOp, magnitude: f32) -> Self {
        AugSpec { op, magnitude, negate: false }
    }

    pub fn parse(name: &str, magnitude: f32) -> Result<Self> {
        Ok(AugSpec::new(name.parse()?, magnitude))
    }

    fn signed(&self, scale: f32) -> f32 {
        let v = scale * self.magnitude;
        if self.negate { -v } else { v }
    }
}

/// Mirror reflection without repeating the edge: `-1 → 1`, `n → n - 2`.
pub fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize { m as usize } else { (period - m) as usize }
}

/// Resamples with `src(y, x)` giving the (fractional) source coordinate of each output pixel.
fn remap(img: &Image, src: impl Fn(f32, f32) -> (f32, f32)) -> Image {
    let (c, h, w) = img.shape();
    let mut out = img.blank_like();
    for y in 0..h {
        for x in 0..w {
            let (sy, sx) = src(y as f32, x as f32);
            let sy = reflect_index(sy.round() as isize, h);
            let sx = reflect_index(sx.round() as isize, w);
            for ch in 0..c {
                out.set(ch, y, x, img.get(ch, sy, sx));
            }
        }
    }
    out
}

/// Integer translation: `out[y][x] = in[reflect(y - dy)][reflect(x - dx)]`.
pub fn translate_reflect(img: &Image, dx: isize, dy: isize) -> Image {
    let (c, h, w) = img.shape();
    let mut out = img.blank_like();
    for ch in 0..c {
        for y in 0..h {
            let sy = reflect_index(y as isize - dy, h);
            for x in 0..w {
                let sx = reflect_index(x as isize - dx, w);
                out.set(ch, y, x, img.get(ch, sy, sx));
            }
        }
    }
    out
}

pub fn hflip(img: &Image) -> Image {
    let (c, h, w) = img.shape();
    let mut out = img.blank_like();
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                out.set(ch, y, x, img.get(ch, y, w - 1 - x));
            }
        }
    }
    out
}

fn map_values(img: &Image, f: impl Fn(f32) -> f32) -> Image {
    let mut out = img.clone();
    out.data_mut().iter_mut().for_each(|v| *v = f(*v));
    out.clamp();
    out
}

fn autocontrast(img: &Image) -> Image {
    let mut out = img.clone();
    for c in 0..img.channels() {
        let plane = out.plane_mut(c);
        let lo = plane.iter().copied().fold(f32::INFINITY, f32::min);
        let hi = plane.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        if hi > lo {
            let scale = 255.0 / (hi - lo);
            plane.iter_mut().for_each(|v| *v = (*v - lo) * scale);
        }
    }
    out.clamp();
    out
}

fn equalize(img: &Image) -> Image {
    let mut out = img.clone();
    for c in 0..img.channels() {
        let plane = out.plane_mut(c);
        let levels: Vec<usize> = plane.iter().map(|v| v.round().clamp(0.0, 255.0) as usize).collect();
        let mut hist = [0usize; 256];
        for &l in &levels {
            hist[l] += 1;
        }
        let last = hist.iter().rposition(|&n| n > 0).map(|i| hist[i]).unwrap_or(0);
        let step = (levels.len() - last) / 255;
        if step == 0 {
            continue;
        }
        let mut lut = [0f32; 256];
        let mut acc = step / 2;
        for (level, count) in hist.iter().enumerate() {
            lut[level] = (acc / step).min(255) as f32;
            acc += count;
        }
        for (v, &l) in plane.iter_mut().zip(&levels) {
            *v = lut[l];
        }
    }
    out
}

fn posterize(img: &Image, magnitude: f32) -> Image {
    let bits = 8 - (7.0 * magnitude).round() as u32;
    let mask: u8 = !((1u16 << (8 - bits)) - 1) as u8;
    map_values(img, |v| ((v.round().clamp(0.0, 255.0) as u8) & mask) as f32)
}

fn mean_intensity(img: &Image) -> f32 {
    if img.channels() == 3 {
        let n = (img.height() * img.width()) as f64;
        let lum: f64 = [0.299, 0.587, 0.114]
            .iter()
            .enumerate()
            .map(|(c, wgt)| wgt * img.plane(c).iter().map(|&v| v as f64).sum::<f64>())
            .sum();
        (lum / n) as f32
    } else {
        (img.data().iter().map(|&v| v as f64).sum::<f64>() / img.data().len() as f64) as f32
    }
}

fn sharpness(img: &Image, factor: f32) -> Image {
    let (c, h, w) = img.shape();
    let mut out = img.clone();
    if h < 3 || w < 3 {
        return out;
    }
    for ch in 0..c {
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                let mut acc = 0.0;
                for dy in 0..3 {
                    for dx in 0..3 {
                        let wgt = if dy == 1 && dx == 1 { 5.0 } else { 1.0 };
                        acc += wgt * img.get(ch, y + dy - 1, x + dx - 1);
                    }
                }
                let blurred = acc / 13.0;
                out.set(ch, y, x, blurred + factor * (img.get(ch, y, x) - blurred));
            }
        }
    }
    out.clamp();
    out
}

/// Applies one primitive. Deterministic in `(spec, img)`.
pub fn apply_transform(spec: &AugSpec, img: &Image) -> Result<Image> {
    if !(0.0..=1.0).contains(&spec.magnitude) {
        return Err(SaaError::config(format!(
            "magnitude {} for {} outside [0, 1]",
            spec.magnitude, spec.op
        )));
    }
    let (_, h, w) = img.shape();
    let (cy, cx) = ((h as f32 - 1.0) / 2.0, (w as f32 - 1.0) / 2.0);
    let m = spec.magnitude;
    Ok(match spec.op {
        StrongOp::Identity => img.clone(),
        StrongOp::AutoContrast => autocontrast(img),
        StrongOp::Equalize => equalize(img),
        StrongOp::Rotate => {
            let theta = spec.signed(30.0).to_radians();
            let (sin, cos) = theta.sin_cos();
            remap(img, |y, x| {
                let (dy, dx) = (y - cy, x - cx);
                (cy - sin * dx + cos * dy, cx + cos * dx + sin * dy)
            })
        }
        StrongOp::Solarize => {
            let threshold = 256.0 * (1.0 - m);
            map_values(img, |v| if v >= threshold { 255.0 - v } else { v })
        }
        StrongOp::Posterize => posterize(img, m),
        StrongOp::Brightness => {
            let factor = 1.0 + spec.signed(0.9);
            map_values(img, |v| v * factor)
        }
        StrongOp::Contrast => {
            let factor = 1.0 + spec.signed(0.9);
            let mean = mean_intensity(img);
            map_values(img, |v| mean + factor * (v - mean))
        }
        StrongOp::Sharpness => sharpness(img, 1.0 + spec.signed(0.9)),
        StrongOp::ShearX => {
            let s = spec.signed(0.3);
            remap(img, |y, x| (y, x + s * (y - cy)))
        }
        StrongOp::ShearY => {
            let s = spec.signed(0.3);
            remap(img, |y, x| (y + s * (x - cx), x))
        }
        StrongOp::TranslateX => translate_reflect(img, (spec.signed(0.3) * w as f32).round() as isize, 0),
        StrongOp::TranslateY => translate_reflect(img, 0, (spec.signed(0.3) * h as f32).round() as isize),
    })
}
