//! Deterministic 2D corridor world: bicycle kinematics, a raycast LIDAR and
//! a column-raycaster RGB-D camera.

mod camera;
mod geometry;
mod kinematics;
mod lidar;
mod map;

pub use camera::{render_camera, CameraConfig, CameraFrame};
pub use geometry::{point_segment, ray_segment, Vec2};
pub use kinematics::{step, CarState, Controls, MAX_WHEEL_ANGLE, WHEELBASE};
pub use lidar::{lidar_scan, LidarConfig, LidarScan};
pub use map::{load_world, straight_corridor, BundledMap, Hit, Pose, Wall, WorldMap};

use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WorldError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("no walls")]
    NoWalls,
    #[error("fewer than 3 walls ({0})")]
    TooFewWalls(usize),
    #[error("zero-length wall (line {line})")]
    ZeroLengthWall { line: usize },
    #[error("centerline needs at least 2 points")]
    ShortCenterline,
    #[error("camera inside wall")]
    CameraInsideWall,
}
