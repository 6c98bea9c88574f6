use core::f64::consts::FRAC_PI_2;
use serde::{Deserialize, Serialize};

use super::{ExpertError, PidController, PidGains};
use crate::simworld::{lidar_scan, CarState, LidarConfig, LidarScan, WorldMap};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    #[default]
    Right,
}

impl Side {
    /// The forward quadrant on this side, relative to the heading.
    pub fn sector(self) -> (f64, f64) {
        match self {
            Side::Right => (-FRAC_PI_2, 0.0),
            Side::Left => (0.0, FRAC_PI_2),
        }
    }
}

/// Signed wall-following error from the closest return in the side's
/// forward quadrant. Positive error means "steer left": too close to a right
/// wall, or too far from a left one.
pub fn wall_follow_error(scan: &LidarScan, setpoint: f64, side: Side) -> Result<f64, ExpertError> {
    if scan.ranges.is_empty() {
        return Err(ExpertError::EmptyScan);
    }
    let (lo, hi) = side.sector();
    let nearest = scan
        .min_in_sector(lo, hi)
        .filter(|&r| r < scan.max_range)
        .ok_or(ExpertError::NoWallVisible)?;
    Ok(match side {
        Side::Right => setpoint - nearest,
        Side::Left => nearest - setpoint,
    })
}

/// LIDAR-driven PID wall follower producing steering commands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WallFollower {
    pub controller: PidController,
    pub setpoint: f64,
    pub side: Side,
    pub lidar: LidarConfig,
}

impl WallFollower {
    pub fn new(gains: PidGains, setpoint: f64, side: Side) -> Self {
        Self {
            controller: PidController::new(gains),
            setpoint,
            side,
            lidar: LidarConfig::default(),
        }
    }

    /// Right-wall follower holding half the corridor width measured at the
    /// map's start pose.
    pub fn for_map(map: &WorldMap, gains: PidGains) -> Self {
        let mut wf = Self::new(gains, 1.0, Side::Right);
        let probe = LidarConfig {
            n_beams: 3,
            fov: core::f64::consts::PI,
            max_range: wf.lidar.max_range,
        };
        let scan = lidar_scan(map, &CarState::at(map.start, 0.0), &probe, 0.0);
        wf.setpoint = (scan.ranges[0] + scan.ranges[2]) / 2.0;
        wf
    }

    pub fn act(&mut self, scan: &LidarScan, dt: f64) -> Result<f64, ExpertError> {
        let e = wall_follow_error(scan, self.setpoint, self.side)?;
        Ok(self.controller.update(e, dt))
    }

    pub fn reset(&mut self) {
        self.controller.reset();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn scan(right: f64, left: f64) -> LidarScan {
        LidarScan {
            angles: vec![-FRAC_PI_2, -0.5, 0.0, 0.5, FRAC_PI_2],
            ranges: vec![right, right + 0.5, 10.0, left + 0.5, left],
            max_range: 10.0,
            timestamp: 0.0,
        }
    }

    #[test]
    fn too_close_on_the_right_steers_left() {
        let e = wall_follow_error(&scan(0.8, 1.2), 1.0, Side::Right).unwrap();
        assert!((e - 0.2).abs() < 1e-12);
    }

    #[test]
    fn at_setpoint_is_zero() {
        assert_eq!(wall_follow_error(&scan(1.0, 1.0), 1.0, Side::Right).unwrap(), 0.0);
        assert_eq!(wall_follow_error(&scan(1.0, 1.0), 1.0, Side::Left).unwrap(), 0.0);
    }

    #[test]
    fn left_side_sign() {
        // close to a left wall → negative error → steer right
        assert!(wall_follow_error(&scan(1.2, 0.8), 1.0, Side::Left).unwrap() < 0.0);
    }

    #[test]
    fn setpoint_is_half_width() {
        let wf = WallFollower::for_map(&crate::simworld::BundledMap::Straight.load(), super::super::expert_gains());
        assert!((wf.setpoint - 1.0).abs() < 1e-12);
        let wf = WallFollower::for_map(&crate::simworld::BundledMap::Loop.load(), super::super::expert_gains());
        assert!((wf.setpoint - 1.5).abs() < 1e-12);
    }

    #[test]
    fn blind_scan_is_an_error() {
        let s = LidarScan {
            angles: vec![-1.0, 0.0, 1.0],
            ranges: vec![10.0; 3],
            max_range: 10.0,
            timestamp: 0.0,
        };
        assert_eq!(wall_follow_error(&s, 1.0, Side::Right), Err(ExpertError::NoWallVisible));
        assert_eq!(ExpertError::NoWallVisible.to_string(), "no wall visible");
    }
}
