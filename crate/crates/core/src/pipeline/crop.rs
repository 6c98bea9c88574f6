use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::image::Image;
use crate::math;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropRect {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl CropRect {
    /// The road-ahead band: rows 200..420 and a centered 400-column window
    /// of a 480×640 frame, scaled proportionally for other sizes.
    pub fn road_band(width: usize, height: usize) -> Self {
        let sy = height as f64 / 480.0;
        let sx = width as f64 / 640.0;
        let top = math::round(200.0 * sy) as usize;
        let bottom = math::round(420.0 * sy) as usize;
        let w = math::round(400.0 * sx) as usize;
        Self {
            top,
            left: (width - w.min(width)) / 2,
            height: bottom - top,
            width: w,
        }
    }
}

/// Crop followed by a bilinear resize. `None` fields take the proportional
/// defaults of [`CropRect::road_band`] and a 100×200 output per 480×640 input.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CropScale {
    pub rect: Option<CropRect>,
    pub out_width: Option<usize>,
    pub out_height: Option<usize>,
}

impl CropScale {
    pub fn resolve(&self, width: usize, height: usize) -> (CropRect, usize, usize) {
        let rect = self.rect.unwrap_or_else(|| CropRect::road_band(width, height));
        let ow = self.out_width.unwrap_or_else(|| math::round(200.0 * width as f64 / 640.0) as usize);
        let oh = self.out_height.unwrap_or_else(|| math::round(100.0 * height as f64 / 480.0) as usize);
        (rect, ow, oh)
    }

    pub fn output_size(&self, width: usize, height: usize) -> (usize, usize) {
        let (_, ow, oh) = self.resolve(width, height);
        (ow, oh)
    }

    pub fn apply(&self, image: &Image) -> Result<Image, PipelineError> {
        let (rect, ow, oh) = self.resolve(image.width, image.height);
        crop_scale(image, rect, ow, oh)
    }
}

pub fn crop_scale(image: &Image, rect: CropRect, out_width: usize, out_height: usize) -> Result<Image, PipelineError> {
    if rect.width == 0
        || rect.height == 0
        || rect.left + rect.width > image.width
        || rect.top + rect.height > image.height
    {
        return Err(PipelineError::CropOutOfBounds {
            rect,
            width: image.width,
            height: image.height,
        });
    }
    let mut cropped = Image::new(rect.width, rect.height, image.channels);
    let ch = image.channels;
    for r in 0..rect.height {
        let src = ((rect.top + r) * image.width + rect.left) * ch;
        let dst = r * rect.width * ch;
        cropped.data[dst..dst + rect.width * ch].copy_from_slice(&image.data[src..src + rect.width * ch]);
    }
    bilinear_resize(&cropped, out_width, out_height)
}

/// Corner-aligned bilinear resampling: output corners sample input corners
/// exactly.
pub fn bilinear_resize(image: &Image, out_width: usize, out_height: usize) -> Result<Image, PipelineError> {
    if out_width == 0 || out_height == 0 {
        return Err(PipelineError::EmptyOutput);
    }
    let scale = |n_in: usize, n_out: usize| {
        if n_out > 1 {
            (n_in - 1) as f64 / (n_out - 1) as f64
        } else {
            0.0
        }
    };
    let (sy, sx) = (scale(image.height, out_height), scale(image.width, out_width));
    let mut out = Image::new(out_width, out_height, image.channels);
    for r in 0..out_height {
        let y = r as f64 * sy;
        let y0 = (math::floor(y) as usize).min(image.height - 1);
        let y1 = (y0 + 1).min(image.height - 1);
        let fy = y - y0 as f64;
        for c in 0..out_width {
            let x = c as f64 * sx;
            let x0 = (math::floor(x) as usize).min(image.width - 1);
            let x1 = (x0 + 1).min(image.width - 1);
            let fx = x - x0 as f64;
            for k in 0..image.channels {
                let p = |yy, xx| image.at(yy, xx, k) as f64;
                let top = p(y0, x0) * (1.0 - fx) + p(y0, x1) * fx;
                let bottom = p(y1, x0) * (1.0 - fx) + p(y1, x1) * fx;
                *out.at_mut(r, c, k) = (top * (1.0 - fy) + bottom * fy) as f32;
            }
        }
    }
    Ok(out)
}
