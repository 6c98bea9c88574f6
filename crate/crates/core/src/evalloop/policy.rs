use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec::Vec;

use super::EvalError;
use crate::expert::WallFollower;
use crate::image::Image;
use crate::models::{decode_steer, Head};
use crate::nn::Network;
use crate::pipeline::PipelineSpec;
use crate::simworld::{CameraConfig, CameraFrame, CarState, LidarScan};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Sensors {
    pub camera: bool,
    pub lidar: bool,
}

/// What a policy sees at one control tick. Only the sensors it asked for
/// are rendered.
pub struct Observation<'a> {
    pub t: f64,
    pub state: &'a CarState,
    pub camera: Option<&'a CameraFrame>,
    pub lidar: Option<&'a LidarScan>,
}

pub trait Policy {
    fn sensors(&self) -> Sensors;

    /// Steering command in [−1, 1].
    fn steer(&mut self, obs: &Observation<'_>, dt: f64) -> Result<f64, EvalError>;

    fn reset(&mut self) {}
}

/// Always the same steer.
#[derive(Clone, Copy, Debug)]
pub struct ConstantPolicy(pub f64);

impl Policy for ConstantPolicy {
    fn sensors(&self) -> Sensors {
        Sensors::default()
    }

    fn steer(&mut self, _: &Observation<'_>, _: f64) -> Result<f64, EvalError> {
        Ok(self.0)
    }
}

/// The PID wall follower as a policy.
#[derive(Clone, Debug)]
pub struct ExpertPolicy(pub WallFollower);

impl Policy for ExpertPolicy {
    fn sensors(&self) -> Sensors {
        Sensors { camera: false, lidar: true }
    }

    fn steer(&mut self, obs: &Observation<'_>, dt: f64) -> Result<f64, EvalError> {
        let scan = obs.lidar.expect("lidar requested");
        self.0.act(scan, dt).map_err(|e| EvalError::Policy { t: obs.t, reason: format!("{e}") })
    }

    fn reset(&mut self) {
        self.0.reset();
    }
}

fn check_shape(pipeline: &PipelineSpec, camera: &CameraConfig, model: &[usize]) -> Result<(), EvalError> {
    let (w, h, c) = pipeline.output_shape(camera.width, camera.height, 3);
    if model != [c, h, w] {
        return Err(EvalError::Shape { pipeline: alloc::vec![c, h, w], model: model.to_vec() });
    }
    Ok(())
}

fn frame_input(pipeline: &PipelineSpec, obs: &Observation<'_>, tick: u64) -> Result<Vec<f32>, EvalError> {
    let frame = obs.camera.expect("camera requested");
    let img = pipeline
        .apply_image(&Image::from_rgb(&frame.rgb), tick)
        .map_err(|e| EvalError::Policy { t: obs.t, reason: format!("{e}") })?;
    Ok(img.to_chw())
}

/// A trained single-frame network behind the image pipeline.
#[derive(Clone, Debug)]
pub struct ModelPolicy {
    pub net: Network<f32>,
    pub pipeline: PipelineSpec,
    pub head: Head,
    pub label_scale: f64,
    /// Decode classification outputs by softmax expectation instead of argmax.
    pub expectation: bool,
    tick: u64,
}

impl ModelPolicy {
    /// Fails if the pipeline's output for `camera` frames does not fit the
    /// network input.
    pub fn new(net: Network<f32>, pipeline: PipelineSpec, head: Head, camera: &CameraConfig) -> Result<Self, EvalError> {
        check_shape(&pipeline, camera, &net.input_shape)?;
        Ok(Self { net, pipeline, head, label_scale: 1.0, expectation: false, tick: 0 })
    }
}

impl Policy for ModelPolicy {
    fn sensors(&self) -> Sensors {
        Sensors { camera: true, lidar: false }
    }

    fn steer(&mut self, obs: &Observation<'_>, _: f64) -> Result<f64, EvalError> {
        let x = frame_input(&self.pipeline, obs, self.tick)?;
        self.tick += 1;
        let out = self.net.forward(&x).map_err(|e| EvalError::Policy { t: obs.t, reason: format!("{e}") })?;
        Ok(decode_steer(&out, self.head, self.label_scale, self.expectation))
    }

    fn reset(&mut self) {
        self.tick = 0;
    }
}

/// Frozen encoder feeding a GRU head over the last `seq_len` frames. Until
/// the window fills, the oldest embedding is repeated.
#[derive(Clone, Debug)]
pub struct SequencePolicy {
    pub encoder: Network<f32>,
    pub head_net: Network<f32>,
    pub pipeline: PipelineSpec,
    pub head: Head,
    window: VecDeque<Vec<f32>>,
    seq_len: usize,
    tick: u64,
}

impl SequencePolicy {
    pub fn new(
        encoder: Network<f32>,
        head_net: Network<f32>,
        pipeline: PipelineSpec,
        head: Head,
        camera: &CameraConfig,
    ) -> Result<Self, EvalError> {
        check_shape(&pipeline, camera, &encoder.input_shape)?;
        let seq_len = head_net.input_shape[0];
        if head_net.input_shape.get(1) != encoder.output_shape().first() {
            return Err(EvalError::Shape { pipeline: encoder.output_shape().to_vec(), model: head_net.input_shape.clone() });
        }
        Ok(Self { encoder, head_net, pipeline, head, window: VecDeque::new(), seq_len, tick: 0 })
    }
}

impl Policy for SequencePolicy {
    fn sensors(&self) -> Sensors {
        Sensors { camera: true, lidar: false }
    }

    fn steer(&mut self, obs: &Observation<'_>, _: f64) -> Result<f64, EvalError> {
        let fail = |e: crate::nn::NnError| EvalError::Policy { t: obs.t, reason: format!("{e}") };
        let x = frame_input(&self.pipeline, obs, self.tick)?;
        self.tick += 1;
        let e = self.encoder.forward(&x).map_err(fail)?;
        if self.window.is_empty() {
            (1..self.seq_len).for_each(|_| self.window.push_back(e.clone()));
        }
        self.window.push_back(e);
        while self.window.len() > self.seq_len {
            self.window.pop_front();
        }
        let seq: Vec<f32> = self.window.iter().flatten().copied().collect();
        let out = self.head_net.forward(&seq).map_err(fail)?;
        Ok(decode_steer(&out, self.head, 1.0, false))
    }

    fn reset(&mut self) {
        self.window.clear();
        self.tick = 0;
    }
}
