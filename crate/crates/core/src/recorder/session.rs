use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{sync_pairs, Dataset, DatasetMeta, RecordError, Sample, Timed};
use crate::expert::WallFollower;
use crate::image::DepthImage;
use crate::simworld::{lidar_scan, render_camera, step, CameraConfig, CameraFrame, CarState, Controls, WorldMap};

/// Collision radius shared with closed-loop evaluation.
pub const COLLISION_RADIUS: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecordConfig {
    /// Camera rate; labels are published every control tick.
    pub hz: f64,
    pub control_dt: f64,
    pub speed: f64,
    pub duration: f64,
    pub slop: f64,
    pub camera: CameraConfig,
    /// Frames are stamped up to this many seconds after capture.
    pub jitter: f64,
    /// Std of Gaussian noise added to the executed steer (the label stays
    /// the expert's command). Zero reproduces a clean expert drive.
    pub steer_noise: f64,
    pub depth: bool,
    pub seed: u64,
}

impl Default for RecordConfig {
    fn default() -> Self {
        Self {
            hz: 20.0,
            control_dt: 0.05,
            speed: 0.8,
            duration: 60.0,
            slop: 0.05,
            camera: CameraConfig::default(),
            jitter: 0.01,
            steer_noise: 0.0,
            depth: false,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Recording {
    pub dataset: Dataset,
    /// (t, state, executed steer) per control tick.
    pub trajectory: Vec<(f64, CarState, f64)>,
    pub labels_published: usize,
    pub collided: bool,
}

/// Drives `expert` around `map`, publishing camera frames and steering
/// labels as two streams, then pairs them with [`sync_pairs`].
pub fn record_expert(map: &WorldMap, expert: &mut WallFollower, cfg: &RecordConfig) -> Result<Recording, RecordError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.steer_noise.max(0.0)).map_err(|e| RecordError::Expert {
        t: 0.0,
        reason: e.to_string(),
    })?;
    let every = (crate::math::round(1.0 / (cfg.hz * cfg.control_dt)) as usize).max(1);
    let steps = crate::math::round(cfg.duration / cfg.control_dt) as usize;

    let mut state = CarState::at(map.start, cfg.speed);
    let mut frames: Vec<CameraFrame> = Vec::new();
    let mut labels: Vec<Timed<f64>> = Vec::new();
    let mut trajectory = Vec::with_capacity(steps);
    let mut collided = false;
    expert.reset();

    for k in 0..steps {
        let t = k as f64 * cfg.control_dt;
        if map.nearest_wall_distance(state.position()) < COLLISION_RADIUS {
            collided = true;
            break;
        }
        let scan = lidar_scan(map, &state, &expert.lidar, t);
        let label = expert.act(&scan, cfg.control_dt).map_err(|e| RecordError::Expert {
            t,
            reason: e.to_string(),
        })?;
        if k % every == 0 {
            let stamp = t + rng.random::<f64>() * cfg.jitter;
            let frame = render_camera(map, &state, &cfg.camera, stamp).map_err(|e| RecordError::Expert {
                t,
                reason: format!("{e}"),
            })?;
            frames.push(frame);
        }
        labels.push(Timed { t, value: label });
        let executed = (label + noise.sample(&mut rng)).clamp(-1.0, 1.0);
        trajectory.push((t, state, executed));
        state = step(state, Controls::new(executed, cfg.speed), cfg.control_dt);
    }

    let labels_published = labels.len();
    let pairs = sync_pairs(frames, labels, cfg.slop)?;
    let samples = pairs
        .into_iter()
        .enumerate()
        .map(|(id, (frame, label))| {
            let mut s = Sample::new(id as u64, frame.rgb, label.value, frame.timestamp);
            if cfg.depth {
                s.depth = Some(DepthImage::from_meters(frame.width, frame.height, &frame.depth));
            }
            s
        })
        .collect();
    let meta = DatasetMeta {
        camera: Some(cfg.camera),
        map: map_name(map),
        expert: "pid".into(),
        hz: Some(cfg.hz),
        slop: Some(cfg.slop),
    };
    Ok(Recording {
        dataset: Dataset::new(samples, meta),
        trajectory,
        labels_published,
        collided,
    })
}

fn map_name(map: &WorldMap) -> alloc::string::String {
    use crate::simworld::BundledMap;
    [BundledMap::Straight, BundledMap::Loop, BundledMap::LTurn]
        .into_iter()
        .find(|b| &b.load() == map)
        .map(|b| b.name().into())
        .unwrap_or_else(|| "custom".into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expert::expert_gains;
    use crate::simworld::BundledMap;

    fn small() -> RecordConfig {
        RecordConfig {
            camera: CameraConfig::default().with_size(32, 24),
            duration: 5.0,
            ..Default::default()
        }
    }

    #[test]
    fn one_sample_per_frame_at_control_rate() {
        let map = BundledMap::Straight.load();
        let mut wf = WallFollower::for_map(&map, expert_gains());
        let rec = record_expert(&map, &mut wf, &small()).unwrap();
        assert_eq!(rec.labels_published, 100);
        assert_eq!(rec.dataset.len(), 100);
        assert!(!rec.collided);
        assert_eq!(rec.dataset.meta.map, "straight");
        let ids: Vec<u64> = rec.dataset.samples.iter().map(|s| s.id).collect();
        assert_eq!(ids, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn lower_camera_rate_drops_labels() {
        let map = BundledMap::Straight.load();
        let mut wf = WallFollower::for_map(&map, expert_gains());
        let cfg = RecordConfig { hz: 5.0, ..small() };
        let rec = record_expert(&map, &mut wf, &cfg).unwrap();
        assert_eq!(rec.dataset.len(), 25);
        assert!(rec.labels_published > rec.dataset.len());
    }

    #[test]
    fn deterministic_under_seed() {
        let map = BundledMap::Loop.load();
        let cfg = RecordConfig { steer_noise: 0.2, seed: 7, ..small() };
        let a = record_expert(&map, &mut WallFollower::for_map(&map, expert_gains()), &cfg).unwrap();
        let b = record_expert(&map, &mut WallFollower::for_map(&map, expert_gains()), &cfg).unwrap();
        assert_eq!(a.dataset, b.dataset);
    }
}
