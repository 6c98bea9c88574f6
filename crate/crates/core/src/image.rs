//! Raster types shared by the camera, the recorder and the pipeline.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::math;

/// 8-bit interleaved RGB raster, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0; width * height * 3],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Self {
        let mut img = Self::new(width, height);
        for r in 0..height {
            for c in 0..width {
                img.put(r, c, f(r, c));
            }
        }
        img
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> [u8; 3] {
        let i = (row * self.width + col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn put(&mut self, row: usize, col: usize, px: [u8; 3]) {
        let i = (row * self.width + col) * 3;
        self.data[i..i + 3].copy_from_slice(&px);
    }

    /// Mirror about the vertical axis: (r, c) → (r, W−1−c).
    pub fn mirrored(&self) -> Self {
        let mut out = self.clone();
        for r in 0..self.height {
            for c in 0..self.width {
                out.put(r, self.width - 1 - c, self.get(r, c));
            }
        }
        out
    }
}

/// 16-bit depth raster in millimeters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    pub mm: Vec<u16>,
}

impl DepthImage {
    pub fn from_meters(width: usize, height: usize, meters: &[f64]) -> Self {
        let mm = meters
            .iter()
            .map(|&m| math::round(m * 1000.0).clamp(0.0, u16::MAX as f64) as u16)
            .collect();
        Self { width, height, mm }
    }

    pub fn mirrored(&self) -> Self {
        let mut out = self.clone();
        for r in 0..self.height {
            for c in 0..self.width {
                out.mm[r * self.width + self.width - 1 - c] = self.mm[r * self.width + c];
            }
        }
        out
    }
}

/// Float raster with 1–4 interleaved channels, values nominally in [0, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn filled(width: usize, height: usize, px: &[f32]) -> Self {
        let mut data = Vec::with_capacity(width * height * px.len());
        for _ in 0..width * height {
            data.extend_from_slice(px);
        }
        Self {
            width,
            height,
            channels: px.len(),
            data,
        }
    }

    pub fn from_rgb(img: &RgbImage) -> Self {
        Self {
            width: img.width,
            height: img.height,
            channels: 3,
            data: img.data.iter().map(|&b| b as f32 / 255.0).collect(),
        }
    }

    /// Rounds back to bytes; only valid for 3-channel images.
    pub fn to_rgb(&self) -> RgbImage {
        assert_eq!(self.channels, 3, "to_rgb needs a 3-channel image");
        RgbImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| unit_to_byte(v)).collect(),
        }
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize, ch: usize) -> f32 {
        self.data[(row * self.width + col) * self.channels + ch]
    }

    #[inline]
    pub fn at_mut(&mut self, row: usize, col: usize, ch: usize) -> &mut f32 {
        &mut self.data[(row * self.width + col) * self.channels + ch]
    }

    pub fn pixel(&self, row: usize, col: usize) -> &[f32] {
        let i = (row * self.width + col) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn mirrored(&self) -> Self {
        let mut out = self.clone();
        let ch = self.channels;
        for r in 0..self.height {
            for c in 0..self.width {
                let src = (r * self.width + c) * ch;
                let dst = (r * self.width + self.width - 1 - c) * ch;
                out.data[dst..dst + ch].copy_from_slice(&self.data[src..src + ch]);
            }
        }
        out
    }

    /// Channels-first copy, the layout the network layers consume.
    pub fn to_chw(&self) -> Vec<f32> {
        let plane = self.width * self.height;
        let mut out = vec![0.0; plane * self.channels];
        for i in 0..plane {
            for ch in 0..self.channels {
                out[ch * plane + i] = self.data[i * self.channels + ch];
            }
        }
        out
    }
}

#[inline]
pub fn unit_to_byte(v: f32) -> u8 {
    math::roundf(v.clamp(0.0, 1.0) * 255.0) as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rgb_float_roundtrip_is_exact() {
        let img = RgbImage::from_fn(4, 3, |r, c| [(r * 50) as u8, (c * 60) as u8, 255]);
        assert_eq!(Image::from_rgb(&img).to_rgb(), img);
    }

    #[test]
    fn chw_layout() {
        let img = Image {
            width: 2,
            height: 1,
            channels: 2,
            data: alloc::vec![1.0, 2.0, 3.0, 4.0],
        };
        assert_eq!(img.to_chw(), alloc::vec![1.0, 3.0, 2.0, 4.0]);
    }
}
