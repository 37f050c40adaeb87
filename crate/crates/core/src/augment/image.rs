use crate::error::{Result, SaaError};

/// Channel-major image with `f32` intensities in `[0, 255]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(SaaError::Shape(format!(
                "image extents must be positive, got {channels}x{height}x{width}"
            )));
        }
        if data.len() != channels * height * width {
            return Err(SaaError::Shape(format!(
                "image {channels}x{height}x{width} needs {} values, got {}",
                channels * height * width,
                data.len()
            )));
        }
        let mut img = Image { channels, height, width, data };
        img.clamp();
        Ok(img)
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f32) -> Result<Self> {
        Self::new(channels, height, width, vec![value; channels * height * width])
    }

    pub fn from_bytes(channels: usize, height: usize, width: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(channels, height, width, bytes.iter().map(|&b| b as f32).collect())
    }

    /// Rounds to the nearest 8-bit intensity.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.data.iter().map(|&v| v.round().clamp(0.0, 255.0) as u8).collect()
    }

    pub(crate) fn blank_like(&self) -> Self {
        Image {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: vec![0.0; self.data.len()],
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f32) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub(crate) fn plane_mut(&mut self, c: usize) -> &mut [f32] {
        let n = self.height * self.width;
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn clamp(&mut self) {
        for v in &mut self.data {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 255.0) };
        }
    }

    /// Sub-image of rows `[y0, y0+h)` and columns `[x0, x0+w)`.
    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Result<Image> {
        if h == 0 || w == 0 || y0 + h > self.height || x0 + w > self.width {
            return Err(SaaError::Shape(format!(
                "crop {h}x{w} at ({y0},{x0}) outside {}x{}",
                self.height, self.width
            )));
        }
        let mut data = Vec::with_capacity(self.channels * h * w);
        for c in 0..self.channels {
            for y in y0..y0 + h {
                let start = (c * self.height + y) * self.width + x0;
                data.extend_from_slice(&self.data[start..start + w]);
            }
        }
        Ok(Image { channels: self.channels, height: h, width: w, data })
    }

    /// Writes `src` into this image with its top-left corner at `(y0, x0)`.
    pub fn paste(&mut self, src: &Image, y0: usize, x0: usize) -> Result<()> {
        if src.channels != self.channels || y0 + src.height > self.height || x0 + src.width > self.width {
            return Err(SaaError::Shape(format!(
                "paste {:?} at ({y0},{x0}) into {:?}",
                src.shape(),
                self.shape()
            )));
        }
        for c in 0..self.channels {
            for y in 0..src.height {
                let dst = (c * self.height + y0 + y) * self.width + x0;
                let s = (c * src.height + y) * src.width;
                self.data[dst..dst + src.width].copy_from_slice(&src.data[s..s + src.width]);
            }
        }
        Ok(())
    }

    pub fn in_range(&self) -> bool {
        self.data.iter().all(|v| (0.0..=255.0).contains(v))
    }
}
