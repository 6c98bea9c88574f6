use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{CarState, WorldError, WorldMap};
use crate::image::RgbImage;
use crate::math;

const FLOOR: [u8; 3] = [96, 96, 96];
const CEILING: [u8; 3] = [210, 210, 216];
/// Closer than this to a wall the camera counts as embedded in it.
const MIN_CLEARANCE: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraConfig {
    pub width: usize,
    pub height: usize,
    /// Horizontal field of view, radians, in (0, π).
    pub hfov: f64,
    pub wall_height: f64,
    pub cam_height: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            width: 640,
            height: 480,
            hfov: core::f64::consts::FRAC_PI_2,
            wall_height: 2.5,
            cam_height: 0.3,
        }
    }
}

impl CameraConfig {
    /// Same field of view at a different resolution.
    pub fn with_size(self, width: usize, height: usize) -> Self {
        Self { width, height, ..self }
    }

    /// Focal length in pixels (square pixels).
    pub fn focal(&self) -> f64 {
        self.width as f64 / 2.0 / math::tan(self.hfov / 2.0)
    }

    /// Ray angle of column `c` relative to the heading (left positive).
    pub fn column_angle(&self, c: usize) -> f64 {
        let x = c as f64 + 0.5 - self.width as f64 / 2.0;
        -math::atan(x / self.focal())
    }

    /// Vertical offset of row `r`'s center below the horizon, pixels.
    pub fn row_offset(&self, r: usize) -> f64 {
        r as f64 + 0.5 - self.height as f64 / 2.0
    }

    /// Rows covered by a wall at perpendicular distance `perp`, as the
    /// half-open range `[top, bottom)`.
    pub fn wall_rows(&self, perp: f64) -> (usize, usize) {
        let f = self.focal();
        let top = -f * (self.wall_height - self.cam_height) / perp;
        let bottom = f * self.cam_height / perp;
        let half = self.height as f64 / 2.0;
        // row r is covered iff top ≤ r + 0.5 − H/2 ≤ bottom
        let first = math::ceil(top + half - 0.5).max(0.0);
        let last = math::floor(bottom + half - 0.5).min(self.height as f64 - 1.0);
        if last < first {
            (0, 0)
        } else {
            (first as usize, last as usize + 1)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CameraFrame {
    pub width: usize,
    pub height: usize,
    pub rgb: RgbImage,
    /// Meters, row-major; euclidean ray distance on wall pixels.
    pub depth: Vec<f64>,
    pub timestamp: f64,
}

fn shade(color: [u8; 3], d: f64) -> [u8; 3] {
    let k = 1.0 / (1.0 + d);
    color.map(|c| math::round(c as f64 * k) as u8)
}

pub fn render_camera(
    map: &WorldMap,
    state: &CarState,
    cfg: &CameraConfig,
    timestamp: f64,
) -> Result<CameraFrame, WorldError> {
    if map.nearest_wall_distance(state.position()) < MIN_CLEARANCE {
        return Err(WorldError::CameraInsideWall);
    }
    let (w, h) = (cfg.width, cfg.height);
    let f = cfg.focal();
    let mut rgb = RgbImage::new(w, h);
    let mut depth = vec![0.0; w * h];

    // floor and ceiling depend only on the row
    let mut row_fill = Vec::with_capacity(h);
    for r in 0..h {
        let yp = cfg.row_offset(r);
        row_fill.push(if yp > 0.0 {
            (FLOOR, f * cfg.cam_height / yp)
        } else {
            (CEILING, f * (cfg.wall_height - cfg.cam_height) / -yp)
        });
    }

    for c in 0..w {
        let alpha = cfg.column_angle(c);
        let hit = map.cast(state.position(), state.heading + alpha);
        let (span, wall) = match hit {
            Some(hit) => (cfg.wall_rows(hit.distance * math::cos(alpha)), Some(hit)),
            None => ((0, 0), None),
        };
        for r in 0..h {
            let i = r * w + c;
            match wall {
                Some(hit) if r >= span.0 && r < span.1 => {
                    rgb.put(r, c, shade(map.walls[hit.wall].color, hit.distance));
                    depth[i] = hit.distance;
                }
                _ => {
                    let (color, d) = row_fill[r];
                    rgb.put(r, c, color);
                    depth[i] = d;
                }
            }
        }
    }
    Ok(CameraFrame {
        width: w,
        height: h,
        rgb,
        depth,
        timestamp,
    })
}
