use std::fs;
use std::path::PathBuf;

use base64::Engine;
use hallway_core::evalloop::{rollout, ExpertPolicy, RolloutConfig};
use hallway_core::expert::{expert_gains, WallFollower};
use hallway_core::recorder::{sync_pairs, DatasetMeta, Sample, Timed, COLLISION_RADIUS};
use hallway_core::simworld::{render_camera, step, BundledMap, CameraConfig, CameraFrame, CarState, Controls, WorldMap};
use serde::{Deserialize, Serialize};

use super::protocol::ServerMsg;
use crate::dataset::DatasetWriter;
use crate::error::{Error, Result};

/// Camera frames go out to clients at this rate at most.
pub const FRAME_HZ: f64 = 5.0;
/// Label/frame pairing window while recording.
pub const RECORD_SLOP: f64 = 0.05;
pub const NOT_PERMITTED: &str = "command not permitted";

#[derive(Clone, Debug)]
pub struct SessionConfig {
    pub map: WorldMap,
    pub map_name: String,
    pub tick_hz: f64,
    pub speed: f64,
    pub camera: CameraConfig,
    /// Where recordings go; also what `ls` lists.
    pub out: PathBuf,
}

impl SessionConfig {
    pub fn new(map: BundledMap, out: impl Into<PathBuf>) -> Self {
        Self {
            map: map.load(),
            map_name: map.name().into(),
            tick_hz: 20.0,
            speed: 0.8,
            camera: CameraConfig::default().with_size(160, 120),
            out: out.into(),
        }
    }
}

/// Snapshot served by `GET /state`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Status {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub steer: f64,
    pub tick: u64,
    pub map: String,
    pub recording: bool,
    /// Rows in labels.csv of the recording directory.
    pub samples: usize,
    pub collided: bool,
    pub clients: usize,
}

/// Outcome of a console line.
#[derive(Clone, Debug, PartialEq)]
pub enum CommandReply {
    Ok(String),
    Refused,
    Failed(String),
}

impl CommandReply {
    pub fn text(&self) -> &str {
        match self {
            CommandReply::Ok(s) | CommandReply::Failed(s) => s,
            CommandReply::Refused => NOT_PERMITTED,
        }
    }
}

/// The simulation owned by the ticker. Everything here runs on one task;
/// clients reach it only through the message queue.
pub struct Session {
    cfg: SessionConfig,
    state: CarState,
    steer: f64,
    t: f64,
    tick: u64,
    collided: bool,
    writer: Option<DatasetWriter>,
    recording: bool,
    frames: Vec<CameraFrame>,
    labels: Vec<Timed<f64>>,
    frame_every: u64,
}

impl Session {
    pub fn new(cfg: SessionConfig) -> Self {
        let frame_every = ((cfg.tick_hz / FRAME_HZ).round() as u64).max(1);
        Self {
            state: CarState::at(cfg.map.start, cfg.speed),
            cfg,
            steer: 0.0,
            t: 0.0,
            tick: 0,
            collided: false,
            writer: None,
            recording: false,
            frames: Vec::new(),
            labels: Vec::new(),
            frame_every,
        }
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.cfg.tick_hz
    }

    pub fn set_steer(&mut self, value: f64) {
        if value.is_finite() {
            self.steer = value.clamp(-1.0, 1.0);
        }
    }

    pub fn status(&self) -> Status {
        Status {
            t: self.t,
            x: self.state.x,
            y: self.state.y,
            theta: self.state.heading,
            steer: self.steer,
            tick: self.tick,
            map: self.cfg.map_name.clone(),
            recording: self.recording,
            samples: self.writer.as_ref().map_or(0, DatasetWriter::len),
            collided: self.collided,
            clients: 0,
        }
    }

    fn render(&self) -> Option<CameraFrame> {
        render_camera(&self.cfg.map, &self.state, &self.cfg.camera, self.t).ok()
    }

    /// Advances one tick and returns what to broadcast: always a pose,
    /// plus a frame every `tick_hz / 5` ticks.
    pub fn tick(&mut self) -> Result<Vec<ServerMsg>> {
        let dt = self.dt();
        if !self.collided {
            self.state = step(self.state, Controls::new(self.steer, self.cfg.speed), dt);
            self.collided = self.cfg.map.nearest_wall_distance(self.state.position()) < COLLISION_RADIUS;
        }
        self.t = (self.tick + 1) as f64 * dt;
        self.tick += 1;

        let mut out = vec![ServerMsg::Pose {
            t: self.t,
            x: self.state.x,
            y: self.state.y,
            theta: self.state.heading,
            steer: self.steer,
        }];
        let stream_frame = self.tick % self.frame_every == 0;
        if self.recording || stream_frame {
            if let Some(frame) = self.render() {
                if stream_frame {
                    out.push(ServerMsg::Frame {
                        w: frame.width,
                        h: frame.height,
                        rgb: base64::engine::general_purpose::STANDARD.encode(&frame.rgb.data),
                    });
                }
                if self.recording {
                    self.labels.push(Timed { t: self.t, value: self.steer });
                    self.frames.push(frame);
                }
            }
            if self.recording && self.tick % self.cfg.tick_hz.round().max(1.0) as u64 == 0 {
                self.drain_recording()?;
            }
        }
        Ok(out)
    }

    /// Pairs buffered frames with labels and writes them out. The label file
    /// is replaced atomically, so readers never see a row without its image.
    fn drain_recording(&mut self) -> Result<()> {
        let Some(w) = self.writer.as_mut() else { return Ok(()) };
        let frames = std::mem::take(&mut self.frames);
        let labels = std::mem::take(&mut self.labels);
        let pairs = sync_pairs(frames, labels, RECORD_SLOP)?;
        let mut id = w.next_id();
        for (frame, label) in pairs {
            w.push(&Sample::new(id, frame.rgb, label.value, frame.timestamp))?;
            id += 1;
        }
        w.flush()
    }

    pub fn set_recording(&mut self, on: bool) -> Result<()> {
        if on && self.writer.is_none() {
            let meta = DatasetMeta {
                camera: Some(self.cfg.camera),
                map: self.cfg.map_name.clone(),
                expert: "teleop".into(),
                hz: Some(self.cfg.tick_hz),
                slop: Some(RECORD_SLOP),
            };
            self.writer = Some(DatasetWriter::open_or_create(&self.cfg.out, meta)?);
        }
        if !on && self.recording {
            self.drain_recording()?;
        }
        self.recording = on;
        Ok(())
    }

    fn reset(&mut self) {
        self.state = CarState::at(self.cfg.map.start, self.cfg.speed);
        self.steer = 0.0;
        self.collided = false;
    }

    fn list_out(&self) -> Result<String> {
        let dir = &self.cfg.out;
        if !dir.exists() {
            return Ok(String::new());
        }
        let mut names = Vec::new();
        for entry in fs::read_dir(dir).map_err(Error::io(dir))? {
            let entry = entry.map_err(Error::io(dir))?;
            let mut name = entry.file_name().to_string_lossy().into_owned();
            if entry.path().is_dir() {
                name.push('/');
            }
            names.push(name);
        }
        names.sort();
        Ok(names.join("\n"))
    }

    fn eval_expert(&self) -> Result<String> {
        let map = &self.cfg.map;
        let mut policy = ExpertPolicy(WallFollower::for_map(map, expert_gains()));
        let cfg = RolloutConfig { speed: self.cfg.speed, camera: self.cfg.camera, ..RolloutConfig::default() };
        let log = rollout(&mut policy, map, &cfg)?;
        Ok(format!(
            "expert on {}: {:?} after {:.2} s, completion {:.3}",
            self.cfg.map_name,
            log.outcome,
            log.duration(),
            log.completion
        ))
    }

    /// Console commands. Only the fixed set below runs; anything else,
    /// including extra arguments, is refused.
    pub fn command(&mut self, line: &str) -> CommandReply {
        let words: Vec<&str> = line.split_whitespace().collect();
        let done = |r: Result<String>| r.map_or_else(|e| CommandReply::Failed(e.to_string()), CommandReply::Ok);
        match words.as_slice() {
            ["ls"] => done(self.list_out()),
            ["status"] => CommandReply::Ok(serde_json::to_string_pretty(&self.status()).expect("status serializes")),
            ["record", "on"] => done(self.set_recording(true).map(|_| "recording on".into())),
            ["record", "off"] => done(self.set_recording(false).map(|_| "recording off".into())),
            ["reset"] => {
                self.reset();
                CommandReply::Ok("reset to start".into())
            }
            ["load-map", name] => match BundledMap::from_name(name) {
                Some(m) => {
                    self.cfg.map = m.load();
                    self.cfg.map_name = m.name().into();
                    self.reset();
                    CommandReply::Ok(format!("loaded {}", m.name()))
                }
                None => CommandReply::Failed(Error::UnknownMap((*name).into()).to_string()),
            },
            ["eval"] => done(self.eval_expert()),
            _ => CommandReply::Refused,
        }
    }
}
