//! Closed-loop rollouts of steering policies, trajectory and offline
//! metrics, and the expert/model overlay export.

mod overlay;
mod policy;

pub use overlay::{overlay_csv, overlay_svg, OVERLAY_HEADER};
pub use policy::{ConstantPolicy, ExpertPolicy, ModelPolicy, Observation, Policy, SequencePolicy, Sensors};

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::models::{evaluate_set, prepare_examples, Head, TrainError};
use crate::nn::{LossSpec, Network};
use crate::pipeline::PipelineSpec;
use crate::recorder::{Dataset, COLLISION_RADIUS};
use crate::simworld::{
    lidar_scan, point_segment, render_camera, step, CameraConfig, CarState, Controls, LidarConfig, Pose, Vec2,
    WorldMap,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("pipeline produces {pipeline:?} but the model expects {model:?}")]
    Shape { pipeline: Vec<usize>, model: Vec<usize> },
    #[error("policy failed at t={t:.2}: {reason}")]
    Policy { t: f64, reason: String },
    #[error("empty trajectory log")]
    EmptyLog,
    #[error(transparent)]
    Train(#[from] TrainError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RolloutConfig {
    pub speed: f64,
    pub dt: f64,
    pub max_t: f64,
    /// Defaults to the map's start pose.
    pub start: Option<Pose>,
    pub camera: CameraConfig,
    pub lidar: LidarConfig,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        Self {
            speed: 0.8,
            dt: 0.05,
            max_t: 120.0,
            start: None,
            camera: CameraConfig::default(),
            lidar: LidarConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    Collided,
    Timeout,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub steer: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub entries: Vec<LogEntry>,
    pub outcome: Outcome,
    /// Share of the centerline covered, in [0, 1].
    pub completion: f64,
}

impl TrajectoryLog {
    /// Time of the last entry.
    pub fn duration(&self) -> f64 {
        self.entries.last().map_or(0.0, |e| e.t)
    }

    pub fn points(&self) -> impl Iterator<Item = Vec2> + '_ {
        self.entries.iter().map(|e| Vec2::new(e.x, e.y))
    }
}

/// Signed arc-length progress along a centerline. Closed centerlines
/// (first point equal to last) complete after one lap of accumulated
/// forward progress, open ones when the projection reaches the end.
#[derive(Clone, Debug)]
pub struct ProgressTracker {
    line: Vec<Vec2>,
    cum: Vec<f64>,
    closed: bool,
    last_s: f64,
    progress: f64,
}

impl ProgressTracker {
    pub fn new(centerline: &[Vec2], start: Vec2) -> Self {
        let mut cum = alloc::vec![0.0];
        for w in centerline.windows(2) {
            cum.push(cum.last().unwrap() + w[0].dist(w[1]));
        }
        let closed = centerline.len() > 2 && centerline[0].dist(*centerline.last().unwrap()) < 1e-9;
        let mut t = Self { line: centerline.to_vec(), cum, closed, last_s: 0.0, progress: 0.0 };
        t.last_s = t.project(start);
        if !closed {
            t.progress = t.last_s;
        }
        t
    }

    pub fn length(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    /// Arc length of the nearest centerline point.
    pub fn project(&self, p: Vec2) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        for (i, w) in self.line.windows(2).enumerate() {
            let (d, u) = point_segment(p, w[0], w[1]);
            if d < best.0 {
                best = (d, self.cum[i] + u * w[0].dist(w[1]));
            }
        }
        best.1
    }

    pub fn update(&mut self, p: Vec2) {
        let s = self.project(p);
        if self.closed {
            let len = self.length();
            let mut d = s - self.last_s;
            if d > len / 2.0 {
                d -= len;
            } else if d < -len / 2.0 {
                d += len;
            }
            self.progress += d;
        } else {
            self.progress = s;
        }
        self.last_s = s;
    }

    pub fn fraction(&self) -> f64 {
        let len = self.length();
        let covered = if self.closed { self.progress } else { self.progress - self.cum[0] };
        (covered / len).clamp(0.0, 1.0)
    }

    pub fn complete(&self) -> bool {
        if self.closed {
            self.progress >= self.length()
        } else {
            self.progress >= self.length() - 1e-9
        }
    }
}

/// Drives `policy` at constant speed until it hits a wall (center within
/// 0.1 m), completes the centerline, or `max_t` passes. Entry `k` is the
/// state at `k·dt` and the steer chosen there; a final entry records the
/// terminal state.
pub fn rollout(policy: &mut dyn Policy, map: &WorldMap, cfg: &RolloutConfig) -> Result<TrajectoryLog, EvalError> {
    let start = cfg.start.unwrap_or(map.start);
    let mut state = CarState::at(start, cfg.speed);
    let mut tracker = ProgressTracker::new(&map.centerline, state.position());
    let sensors = policy.sensors();
    let steps = crate::math::ceil(cfg.max_t / cfg.dt - 1e-9) as usize;
    let mut entries = Vec::with_capacity(steps + 1);
    policy.reset();
    let entry = |t: f64, s: &CarState, steer: f64| LogEntry { t, x: s.x, y: s.y, heading: s.heading, steer };
    let mut steer = 0.0;
    let mut outcome = Outcome::Timeout;
    for k in 0..steps {
        let t = k as f64 * cfg.dt;
        let fail = |e: &dyn core::fmt::Display| EvalError::Policy { t, reason: alloc::format!("{e}") };
        let camera = match sensors.camera {
            true => Some(render_camera(map, &state, &cfg.camera, t).map_err(|e| fail(&e))?),
            false => None,
        };
        let lidar = sensors.lidar.then(|| lidar_scan(map, &state, &cfg.lidar, t));
        let obs = Observation { t, state: &state, camera: camera.as_ref(), lidar: lidar.as_ref() };
        steer = policy.steer(&obs, cfg.dt)?.clamp(-1.0, 1.0);
        entries.push(entry(t, &state, steer));
        state = step(state, Controls::new(steer, cfg.speed), cfg.dt);
        tracker.update(state.position());
        if map.nearest_wall_distance(state.position()) < COLLISION_RADIUS {
            outcome = Outcome::Collided;
        } else if tracker.complete() {
            outcome = Outcome::Completed;
        }
        if outcome != Outcome::Timeout {
            break;
        }
    }
    let t_end = entries.len() as f64 * cfg.dt;
    entries.push(entry(t_end, &state, steer));
    Ok(TrajectoryLog { entries, outcome, completion: tracker.fraction() })
}

/// Mean and max distance from each entry to the nearest centerline segment.
pub fn cross_track_error(traj: &TrajectoryLog, centerline: &[Vec2]) -> Result<(f64, f64), EvalError> {
    if traj.entries.is_empty() {
        return Err(EvalError::EmptyLog);
    }
    let d: Vec<f64> = traj
        .points()
        .map(|p| {
            centerline.windows(2).map(|w| point_segment(p, w[0], w[1]).0).fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    Ok((mean, d.iter().copied().fold(0.0, f64::max)))
}

/// Dataset-level fields of an [`EvalReport`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OfflineMetrics {
    pub accuracy: f64,
    pub confusion: Vec<Vec<usize>>,
    pub pred_entropy: f64,
    pub straight_fraction: f64,
}

/// Runs the image stages of `pipeline` on `ds` and scores `net`.
pub fn offline_metrics(
    net: &Network<f32>,
    pipeline: &PipelineSpec,
    ds: &Dataset,
    head: Head,
    loss: &LossSpec,
    label_scale: f64,
) -> Result<OfflineMetrics, EvalError> {
    let ex = prepare_examples(ds, pipeline).map_err(TrainError::from)?;
    let m = evaluate_set(net, &ex, loss, head, label_scale)?;
    Ok(OfflineMetrics {
        accuracy: m.accuracy,
        confusion: m.confusion,
        pred_entropy: m.pred_entropy,
        straight_fraction: m.straight_fraction,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub outcome: Outcome,
    pub duration: f64,
    pub mean_cross_track: f64,
    pub max_cross_track: f64,
    pub completion: f64,
    pub collisions: usize,
    pub offline: Option<OfflineMetrics>,
}

impl EvalReport {
    pub fn from_rollout(traj: &TrajectoryLog, map: &WorldMap) -> Result<Self, EvalError> {
        let (mean, max) = cross_track_error(traj, &map.centerline)?;
        Ok(Self {
            outcome: traj.outcome,
            duration: traj.duration(),
            mean_cross_track: mean,
            max_cross_track: max,
            completion: traj.completion,
            collisions: usize::from(traj.outcome == Outcome::Collided),
            offline: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expert::{expert_gains, WallFollower};
    use crate::simworld::{straight_corridor, BundledMap};
    use alloc::vec;

    fn log(points: &[(f64, f64)]) -> TrajectoryLog {
        let entries = points
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| LogEntry { t: i as f64, x, y, heading: 0.0, steer: 0.0 })
            .collect();
        TrajectoryLog { entries, outcome: Outcome::Timeout, completion: 0.0 }
    }

    #[test]
    fn zero_policy_drives_straight_corridor() {
        let map = BundledMap::Straight.load();
        let traj = rollout(&mut ConstantPolicy(0.0), &map, &RolloutConfig::default()).unwrap();
        assert_eq!(traj.outcome, Outcome::Completed);
        assert!(traj.entries.iter().all(|e| e.y == map.start.y && e.heading == 0.0));
        assert!(traj.entries.windows(2).all(|w| w[1].t > w[0].t));
        assert_eq!(traj.completion, 1.0);
    }

    #[test]
    fn full_right_curls_clockwise_into_a_wall() {
        let map = BundledMap::Straight.load();
        let traj = rollout(&mut ConstantPolicy(-1.0), &map, &RolloutConfig::default()).unwrap();
        assert_eq!(traj.outcome, Outcome::Collided);
        assert!(traj.entries.windows(2).all(|w| w[1].heading < w[0].heading));
        let last = traj.entries.last().unwrap();
        assert!(map.nearest_wall_distance(Vec2::new(last.x, last.y)) < COLLISION_RADIUS);
    }

    #[test]
    fn expert_completes_loop() {
        let map = BundledMap::Loop.load();
        let mut expert = ExpertPolicy(WallFollower::for_map(&map, expert_gains()));
        let traj = rollout(&mut expert, &map, &RolloutConfig::default()).unwrap();
        assert_eq!(traj.outcome, Outcome::Completed);
        let lap = traj.duration();
        assert!(lap > 36.0 / 0.8 * 0.8 && lap < 36.0 / 0.8 * 1.3, "lap {lap}");
        let a = rollout(&mut expert, &map, &RolloutConfig::default()).unwrap();
        assert_eq!(a, traj);
    }

    #[test]
    fn timeout_when_max_t_runs_out() {
        let map = straight_corridor(80.0, 2.0);
        let cfg = RolloutConfig { max_t: 1.0, ..RolloutConfig::default() };
        let traj = rollout(&mut ConstantPolicy(0.0), &map, &cfg).unwrap();
        assert_eq!(traj.outcome, Outcome::Timeout);
        assert_eq!(traj.entries.len(), 21);
        assert!((traj.duration() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cross_track_on_and_off_center() {
        let line = vec![Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0)];
        assert_eq!(cross_track_error(&log(&[(1.0, 0.0), (5.0, 0.0)]), &line).unwrap(), (0.0, 0.0));
        assert_eq!(cross_track_error(&log(&[(1.0, 0.5), (5.0, -0.5), (9.0, 0.5)]), &line).unwrap(), (0.5, 0.5));
        assert_eq!(cross_track_error(&log(&[]), &line), Err(EvalError::EmptyLog));
    }

    #[test]
    fn closed_progress_unwraps() {
        let sq = [(0.0, 0.0), (4.0, 0.0), (4.0, 4.0), (0.0, 4.0), (0.0, 0.0)].map(|(x, y)| Vec2::new(x, y));
        let mut t = ProgressTracker::new(&sq, Vec2::new(2.0, 0.0));
        for p in [(4.0, 1.0), (3.0, 4.0), (0.0, 2.0), (1.0, 0.0)] {
            t.update(Vec2::new(p.0, p.1));
        }
        assert!(!t.complete());
        assert!((t.fraction() - 15.0 / 16.0).abs() < 1e-12);
        t.update(Vec2::new(2.5, 0.0));
        assert!(t.complete());
    }
}
