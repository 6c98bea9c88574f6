use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::image::Image;
use crate::math;

/// Luma (BT.601 weights) for RGB, channel mean otherwise.
pub fn grayscale(image: &Image) -> Vec<f32> {
    image
        .data
        .chunks_exact(image.channels)
        .map(|p| match p.len() {
            1 => p[0],
            3 => 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2],
            n => p.iter().sum::<f32>() / n as f32,
        })
        .collect()
}

/// Binary edge map: Sobel magnitude (scaled so a unit step scores 1) thinned
/// along the gradient direction, then thresholded. Border pixels are 0.
pub fn edge_map(image: &Image, threshold: f32) -> Image {
    let (w, h) = (image.width, image.height);
    let g = grayscale(image);
    let mut mag = vec![0.0f32; w * h];
    let mut dir = vec![0u8; w * h];
    let at = |r: usize, c: usize| g[r * w + c];
    for r in 1..h.saturating_sub(1) {
        for c in 1..w.saturating_sub(1) {
            let gx = (at(r - 1, c + 1) + 2.0 * at(r, c + 1) + at(r + 1, c + 1))
                - (at(r - 1, c - 1) + 2.0 * at(r, c - 1) + at(r + 1, c - 1));
            let gy = (at(r + 1, c - 1) + 2.0 * at(r + 1, c) + at(r + 1, c + 1))
                - (at(r - 1, c - 1) + 2.0 * at(r - 1, c) + at(r - 1, c + 1));
            mag[r * w + c] = math::sqrtf(gx * gx + gy * gy) / 4.0;
            // gradient direction quantized to 0°, 45°, 90°, 135°
            let angle = math::atan2(gy as f64, gx as f64);
            let a = if angle < 0.0 { angle + PI } else { angle };
            dir[r * w + c] = (math::round(a / (PI / 4.0)) as u8) % 4;
        }
    }
    let mut out = Image::new(w, h, 1);
    for r in 1..h.saturating_sub(1) {
        for c in 1..w.saturating_sub(1) {
            let m = mag[r * w + c];
            if m < threshold || m == 0.0 {
                continue;
            }
            let (dr, dc): (isize, isize) = match dir[r * w + c] {
                0 => (0, 1),
                1 => (1, 1),
                2 => (1, 0),
                _ => (1, -1),
            };
            let prev = mag[(r as isize - dr) as usize * w + (c as isize - dc) as usize];
            let next = mag[(r as isize + dr) as usize * w + (c as isize + dc) as usize];
            // on a plateau only the first pixel along the gradient survives
            if m > prev && m >= next {
                out.data[r * w + c] = 1.0;
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Line {
    /// Signed distance from the origin (top-left pixel), pixels.
    pub rho: f64,
    /// Normal angle in [0, π); x·cosθ + y·sinθ = ρ with x = column, y = row.
    pub theta: f64,
    pub votes: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HoughConfig {
    pub rho_res: f64,
    pub theta_res: f64,
    /// Absolute vote threshold; `None` means 0.3 × the accumulator maximum.
    pub threshold: Option<usize>,
    pub max_lines: usize,
}

impl Default for HoughConfig {
    fn default() -> Self {
        Self {
            rho_res: 1.0,
            theta_res: PI / 180.0,
            threshold: None,
            max_lines: 16,
        }
    }
}

/// Accumulator laid out as `[theta][rho]`, with its ρ offset and sizes.
pub struct Accumulator {
    pub votes: Vec<usize>,
    pub n_theta: usize,
    pub n_rho: usize,
    pub rho_max: f64,
}

impl Accumulator {
    pub fn get(&self, t: usize, r: usize) -> usize {
        self.votes[t * self.n_rho + r]
    }
}

pub fn hough_accumulator(binary: &Image, cfg: &HoughConfig) -> Result<Accumulator, PipelineError> {
    if binary.channels != 1 {
        return Err(PipelineError::Channels { expected: 1, got: binary.channels });
    }
    if !(cfg.rho_res > 0.0 && cfg.theta_res > 0.0) {
        return Err(PipelineError::Param("hough resolutions must be positive".into()));
    }
    let n_theta = (math::round(PI / cfg.theta_res) as usize).max(1);
    let rho_max = math::ceil(math::hypot(binary.width as f64, binary.height as f64));
    let n_rho = (math::floor(2.0 * rho_max / cfg.rho_res) as usize) + 1;
    let trig: Vec<(f64, f64)> = (0..n_theta)
        .map(|t| {
            let th = t as f64 * PI / n_theta as f64;
            (math::cos(th), math::sin(th))
        })
        .collect();
    let mut votes = vec![0usize; n_theta * n_rho];
    for r in 0..binary.height {
        for c in 0..binary.width {
            if binary.data[r * binary.width + c] <= 0.5 {
                continue;
            }
            for (t, &(cs, sn)) in trig.iter().enumerate() {
                let rho = c as f64 * cs + r as f64 * sn;
                let bin = math::round((rho + rho_max) / cfg.rho_res) as usize;
                votes[t * n_rho + bin] += 1;
            }
        }
    }
    Ok(Accumulator { votes, n_theta, n_rho, rho_max })
}

/// Standard (ρ, θ) Hough transform. A cell is a peak when it reaches the
/// threshold and no 3×3 neighbor beats it (an equal neighbor earlier in scan
/// order also wins). Lines are sorted by votes, descending.
pub fn hough_lines(binary: &Image, cfg: &HoughConfig) -> Result<Vec<Line>, PipelineError> {
    let acc = hough_accumulator(binary, cfg)?;
    let max = acc.votes.iter().copied().max().unwrap_or(0);
    if max == 0 {
        return Ok(Vec::new());
    }
    let threshold = cfg
        .threshold
        .unwrap_or_else(|| math::ceil(0.3 * max as f64) as usize)
        .max(1);
    let mut lines = Vec::new();
    for t in 0..acc.n_theta {
        for r in 0..acc.n_rho {
            let v = acc.get(t, r);
            if v < threshold {
                continue;
            }
            let mut peak = true;
            'nbr: for dt in -1isize..=1 {
                for dr in -1isize..=1 {
                    if dt == 0 && dr == 0 {
                        continue;
                    }
                    let (tt, rr) = (t as isize + dt, r as isize + dr);
                    if tt < 0 || rr < 0 || tt >= acc.n_theta as isize || rr >= acc.n_rho as isize {
                        continue;
                    }
                    let u = acc.get(tt as usize, rr as usize);
                    let earlier = (dt, dr) < (0, 0);
                    if u > v || (u == v && earlier) {
                        peak = false;
                        break 'nbr;
                    }
                }
            }
            if peak {
                lines.push(Line {
                    rho: r as f64 * cfg.rho_res - acc.rho_max,
                    theta: t as f64 * PI / acc.n_theta as f64,
                    votes: v,
                });
            }
        }
    }
    lines.sort_by(|a, b| b.votes.cmp(&a.votes));
    lines.truncate(cfg.max_lines);
    Ok(lines)
}
