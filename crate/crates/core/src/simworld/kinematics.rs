use serde::{Deserialize, Serialize};

use super::Pose;
use crate::math;

/// Wheelbase in meters (1/10-scale racecar).
pub const WHEELBASE: f64 = 0.33;
/// Front wheel angle at full steer, radians.
pub const MAX_WHEEL_ANGLE: f64 = 0.34;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarState {
    pub x: f64,
    pub y: f64,
    /// Radians in (−π, π].
    pub heading: f64,
    /// m/s, never negative.
    pub speed: f64,
}

impl CarState {
    pub fn at(pose: Pose, speed: f64) -> Self {
        Self {
            x: pose.x,
            y: pose.y,
            heading: math::normalize_angle(pose.heading),
            speed: speed.max(0.0),
        }
    }

    pub fn position(&self) -> super::Vec2 {
        super::Vec2::new(self.x, self.y)
    }
}

/// Steering command: +1 is full left, −1 full right.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Controls {
    pub steer: f64,
    pub speed: f64,
}

impl Controls {
    /// Clamps `steer` into [−1, 1] and `speed` to ≥ 0.
    pub fn new(steer: f64, speed: f64) -> Self {
        Self {
            steer: if steer.is_nan() { 0.0 } else { steer.clamp(-1.0, 1.0) },
            speed: speed.max(0.0),
        }
    }
}

/// Advances the kinematic bicycle by one explicit-Euler step of `dt` seconds.
pub fn step(state: CarState, controls: Controls, dt: f64) -> CarState {
    debug_assert!(dt > 0.0);
    let v = controls.speed.max(0.0);
    let delta = controls.steer.clamp(-1.0, 1.0) * MAX_WHEEL_ANGLE;
    CarState {
        x: state.x + v * math::cos(state.heading) * dt,
        y: state.y + v * math::sin(state.heading) * dt,
        heading: math::normalize_angle(state.heading + v / WHEELBASE * math::tan(delta) * dt),
        speed: v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn origin() -> CarState {
        CarState { x: 0.0, y: 0.0, heading: 0.0, speed: 0.0 }
    }

    #[test]
    fn zero_speed_holds_pose() {
        let s = step(CarState { x: 1.0, y: 2.0, heading: 0.5, speed: 0.0 }, Controls::new(0.7, 0.0), 0.1);
        assert_eq!((s.x, s.y, s.heading), (1.0, 2.0, 0.5));
    }

    #[test]
    fn straight_unit_step() {
        let s = step(origin(), Controls::new(0.0, 1.0), 1.0);
        assert_eq!((s.x, s.y, s.heading), (1.0, 0.0, 0.0));
    }

    #[test]
    fn positive_steer_turns_left() {
        let mut s = origin();
        for _ in 0..10 {
            s = step(s, Controls::new(0.5, 1.0), 0.05);
        }
        assert!(s.heading > 0.0 && s.y > 0.0);
    }

    #[test]
    fn controls_clamp() {
        assert_eq!(Controls::new(3.0, -1.0), Controls { steer: 1.0, speed: 0.0 });
        assert_eq!(Controls::new(f64::NAN, 1.0).steer, 0.0);
    }
}
