use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{CarState, WorldMap};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LidarConfig {
    pub n_beams: usize,
    /// Total field of view, radians.
    pub fov: f64,
    pub max_range: f64,
}

impl Default for LidarConfig {
    fn default() -> Self {
        Self {
            n_beams: 271,
            fov: 270f64.to_radians(),
            max_range: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LidarScan {
    /// Beam angles relative to the heading, radians.
    pub angles: Vec<f64>,
    pub ranges: Vec<f64>,
    pub max_range: f64,
    pub timestamp: f64,
}

impl LidarScan {
    /// Smallest range among beams whose relative angle lies in `[lo, hi]`.
    pub fn min_in_sector(&self, lo: f64, hi: f64) -> Option<f64> {
        self.angles
            .iter()
            .zip(&self.ranges)
            .filter(|(a, _)| **a >= lo - 1e-12 && **a <= hi + 1e-12)
            .map(|(_, r)| *r)
            .reduce(f64::min)
    }
}

/// Beam `i` points at `heading + fov·(i/(n−1) − 0.5)`.
pub fn beam_angle(i: usize, n_beams: usize, fov: f64) -> f64 {
    fov * (i as f64 / (n_beams - 1) as f64 - 0.5)
}

pub fn lidar_scan(map: &WorldMap, state: &CarState, cfg: &LidarConfig, timestamp: f64) -> LidarScan {
    assert!(cfg.n_beams >= 2, "lidar needs at least 2 beams");
    let origin = state.position();
    let (angles, ranges) = (0..cfg.n_beams)
        .map(|i| {
            let rel = beam_angle(i, cfg.n_beams, cfg.fov);
            let range = map
                .cast(origin, state.heading + rel)
                .map_or(cfg.max_range, |h| h.distance.min(cfg.max_range));
            (rel, range)
        })
        .unzip();
    LidarScan {
        angles,
        ranges,
        max_range: cfg.max_range,
        timestamp,
    }
}
