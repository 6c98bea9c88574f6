use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::image::Image;
use crate::math;

/// Pixel coordinates: `x` is the column, `y` the row.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Row-major 3×3 projective map with h[8] = 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Homography(pub [f64; 9]);

impl Homography {
    pub fn apply(&self, p: Point) -> Point {
        let h = &self.0;
        let w = h[6] * p.x + h[7] * p.y + h[8];
        Point::new((h[0] * p.x + h[1] * p.y + h[2]) / w, (h[3] * p.x + h[4] * p.y + h[5]) / w)
    }

    pub fn inverse(&self) -> Option<Homography> {
        let m = &self.0;
        let cof = [
            m[4] * m[8] - m[5] * m[7],
            m[2] * m[7] - m[1] * m[8],
            m[1] * m[5] - m[2] * m[4],
            m[5] * m[6] - m[3] * m[8],
            m[0] * m[8] - m[2] * m[6],
            m[2] * m[3] - m[0] * m[5],
            m[3] * m[7] - m[4] * m[6],
            m[1] * m[6] - m[0] * m[7],
            m[0] * m[4] - m[1] * m[3],
        ];
        let det = m[0] * cof[0] + m[1] * cof[3] + m[2] * cof[6];
        if det.abs() < 1e-12 {
            return None;
        }
        Some(Homography(cof.map(|c| c / det)))
    }
}

/// Solves the 8-unknown linear system taking `src[i]` to `dst[i]`.
pub fn homography(src: [Point; 4], dst: [Point; 4]) -> Option<Homography> {
    let mut a = [[0.0f64; 9]; 8];
    for i in 0..4 {
        let (x, y, u, v) = (src[i].x, src[i].y, dst[i].x, dst[i].y);
        a[2 * i] = [x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y, u];
        a[2 * i + 1] = [0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y, v];
    }
    // Gaussian elimination with partial pivoting on the augmented matrix
    for col in 0..8 {
        let pivot = (col..8).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        for row in 0..8 {
            if row != col {
                let f = a[row][col] / a[col][col];
                for k in col..9 {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
    }
    let mut h = [0.0; 9];
    for i in 0..8 {
        h[i] = a[i][8] / a[i][i];
    }
    h[8] = 1.0;
    Some(Homography(h))
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Warps `patch` onto the convex quad (corners in the order of the patch's
/// top-left, top-right, bottom-right, bottom-left) and pastes it; pixels
/// outside the quad are untouched.
pub fn composite_patch(image: &Image, patch: &Image, quad: [Point; 4]) -> Result<Image, PipelineError> {
    if patch.channels != image.channels {
        return Err(PipelineError::Channels { expected: image.channels, got: patch.channels });
    }
    let turns: [f64; 4] = core::array::from_fn(|i| cross(quad[i], quad[(i + 1) % 4], quad[(i + 2) % 4]));
    let convex = turns.iter().all(|&t| t > 1e-9) || turns.iter().all(|&t| t < -1e-9);
    if !convex {
        return Err(PipelineError::DegenerateQuad);
    }
    let (w, h) = (image.width as f64, image.height as f64);
    if quad.iter().any(|p| !(p.x >= 0.0 && p.y >= 0.0 && p.x <= w - 1.0 && p.y <= h - 1.0)) {
        return Err(PipelineError::QuadOutOfBounds);
    }
    let unit = [Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(1.0, 1.0), Point::new(0.0, 1.0)];
    let inv = homography(unit, quad)
        .and_then(|hm| hm.inverse())
        .ok_or(PipelineError::DegenerateQuad)?;
    let sign = turns[0].signum();
    let inside = |p: Point| (0..4).all(|i| cross(quad[i], quad[(i + 1) % 4], p) * sign >= -1e-9);

    let x0 = quad.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
    let x1 = quad.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
    let y0 = quad.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
    let y1 = quad.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
    let mut out = image.clone();
    let (pw, ph) = (patch.width as f64 - 1.0, patch.height as f64 - 1.0);
    for r in math::ceil(y0) as usize..=math::floor(y1) as usize {
        for c in math::ceil(x0) as usize..=math::floor(x1) as usize {
            let p = Point::new(c as f64, r as f64);
            if !inside(p) {
                continue;
            }
            let uv = inv.apply(p);
            let sx = uv.x.clamp(0.0, 1.0) * pw;
            let sy = uv.y.clamp(0.0, 1.0) * ph;
            let (cx0, cy0) = (math::floor(sx) as usize, math::floor(sy) as usize);
            let (cx1, cy1) = ((cx0 + 1).min(patch.width - 1), (cy0 + 1).min(patch.height - 1));
            let (fx, fy) = (sx - cx0 as f64, sy - cy0 as f64);
            for k in 0..image.channels {
                let s = |yy, xx| patch.at(yy, xx, k) as f64;
                let top = s(cy0, cx0) * (1.0 - fx) + s(cy0, cx1) * fx;
                let bottom = s(cy1, cx0) * (1.0 - fx) + s(cy1, cx1) * fx;
                *out.at_mut(r, c, k) = (top * (1.0 - fy) + bottom * fy) as f32;
            }
        }
    }
    Ok(out)
}

/// Uniform random patch, the "noise on the masked surface".
pub fn noise_patch(width: usize, height: usize, channels: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut img = Image::new(width, height, channels);
    for v in &mut img.data {
        *v = rng.random::<f32>();
    }
    img
}
